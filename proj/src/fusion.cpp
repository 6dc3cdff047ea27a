#include "finrag/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "finrag/errors.hpp"
#include "finrag/eval.hpp"

namespace finrag {

Normalization normalization_from_string(const std::string& s) {
    if (s == "minmax") return Normalization::minmax;
    if (s == "none") return Normalization::none;
    throw ConfigError("unknown normalization '" + s + "' (expected minmax|none)");
}

std::string to_string(Normalization n) {
    return n == Normalization::minmax ? "minmax" : "none";
}

void FusionConfig::validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw ConfigError("fusion alpha must lie in [0, 1]");
    if (candidate_pool < 1) throw ConfigError("candidate_pool must be >= 1");
}

RankedList normalize_scores(const RankedList& rl, Normalization mode) {
    if (mode == Normalization::none || rl.entries.empty()) return rl;

    double lo = rl.entries.front().score, hi = rl.entries.front().score;
    for (const auto& e : rl.entries) {
        lo = std::min(lo, e.score);
        hi = std::max(hi, e.score);
    }

    RankedList out = rl;
    if (hi == lo) {
        for (auto& e : out.entries) e.score = 1.0;
    } else {
        for (auto& e : out.entries) e.score = (e.score - lo) / (hi - lo);
    }
    return out;
}

RankedList fuse(const RankedList& dense, const RankedList& sparse,
                const FusionConfig& cfg) {
    cfg.validate();
    if (dense.query_id != sparse.query_id)
        throw DataError("fuse: query id mismatch ('" + dense.query_id + "' vs '" +
                        sparse.query_id + "')");

    auto pool = [&](const RankedList& rl) {
        RankedList p{rl.query_id, {}};
        size_t take = std::min<size_t>(rl.entries.size(),
                                       static_cast<size_t>(cfg.candidate_pool));
        p.entries.assign(rl.entries.begin(), rl.entries.begin() + take);
        return normalize_scores(p, cfg.normalization);
    };
    RankedList dpool = pool(dense);
    RankedList spool = pool(sparse);

    struct Pair {
        double dense_score = 0.0;
        double sparse_score = 0.0;
    };
    std::map<std::string, Pair> candidates; // absent side stays at 0
    for (const auto& e : dpool.entries) candidates[e.doc_id].dense_score = e.score;
    for (const auto& e : spool.entries) candidates[e.doc_id].sparse_score = e.score;

    std::vector<std::pair<std::string, double>> totals;
    totals.reserve(candidates.size());
    for (const auto& [doc, p] : candidates)
        totals.emplace_back(doc, cfg.alpha * p.dense_score +
                                     (1.0 - cfg.alpha) * p.sparse_score);

    std::sort(totals.begin(), totals.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    RankedList out;
    out.query_id = dense.query_id;
    out.entries.reserve(totals.size());
    for (size_t i = 0; i < totals.size(); ++i)
        out.entries.push_back(
            RunEntry{totals[i].first, totals[i].second, static_cast<int>(i) + 1});
    return out;
}

SweepResult alpha_sweep(const std::vector<RankedList>& dense_runs,
                        const std::vector<RankedList>& sparse_runs, const Qrels& qrels,
                        double step, const FusionConfig& base) {
    if (step <= 0.0 || step > 1.0) throw ConfigError("sweep step must be in (0, 1]");
    const double cells_exact = 1.0 / step;
    const int cells = static_cast<int>(std::lround(cells_exact));
    if (std::abs(cells_exact - cells) > 1e-9)
        throw ConfigError("sweep step must divide 1 into an integer grid");

    std::map<std::string, const RankedList*> dense_by_query, sparse_by_query;
    for (const auto& rl : dense_runs) {
        if (!dense_by_query.emplace(rl.query_id, &rl).second)
            throw DataError("alpha_sweep: duplicate query '" + rl.query_id +
                            "' in dense runs");
    }
    for (const auto& rl : sparse_runs) {
        if (!sparse_by_query.emplace(rl.query_id, &rl).second)
            throw DataError("alpha_sweep: duplicate query '" + rl.query_id +
                            "' in sparse runs");
    }

    std::map<std::string, std::pair<const RankedList*, const RankedList*>> pairs;
    for (const auto& [qid, rl] : dense_by_query) pairs[qid].first = rl;
    for (const auto& [qid, rl] : sparse_by_query) pairs[qid].second = rl;

    SweepResult result;
    result.grid.reserve(cells + 1);
    FusionConfig cfg = base;
    for (int i = 0; i <= cells; ++i) {
        cfg.alpha = (i == cells) ? 1.0 : i * step;

        std::vector<RankedList> fused;
        fused.reserve(pairs.size());
        for (const auto& [qid, pr] : pairs) {
            RankedList empty{qid, {}};
            const RankedList& d = pr.first ? *pr.first : empty;
            const RankedList& s = pr.second ? *pr.second : empty;
            fused.push_back(fuse(d, s, cfg));
        }

        MetricReport report;
        try {
            report = evaluate_run(fused, qrels, MetricConfig{10, true});
        } catch (const DataError& e) {
            throw DataError("alpha_sweep: " + std::string(e.what()));
        }
        result.grid.push_back(SweepPoint{cfg.alpha, report.means.at("ndcg@10")});
    }

    result.optimal_alpha = result.grid.front().alpha;
    result.optimal_score = result.grid.front().ndcg10;
    for (const auto& p : result.grid) {
        if (p.ndcg10 > result.optimal_score) { // ties keep the smaller alpha
            result.optimal_score = p.ndcg10;
            result.optimal_alpha = p.alpha;
        }
    }
    return result;
}

nlohmann::json sweep_report_json(const SweepResult& result) {
    nlohmann::json j;
    auto& grid = j["grid"] = nlohmann::json::array();
    for (const auto& p : result.grid)
        grid.push_back({{"alpha", p.alpha}, {"ndcg10", p.ndcg10}});
    j["optimal_alpha"] = result.optimal_alpha;
    j["optimal_score"] = result.optimal_score;
    return j;
}

std::string sweep_report_csv(const SweepResult& result) {
    std::string out = "alpha,ndcg10\n";
    char buf[64];
    for (const auto& p : result.grid) {
        std::snprintf(buf, sizeof(buf), "%.3f,%.6f\n", p.alpha, p.ndcg10);
        out += buf;
    }
    return out;
}

} // namespace finrag
