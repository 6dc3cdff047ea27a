#include "finrag/eval.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "finrag/errors.hpp"

namespace finrag {

double dcg_at_k(const std::vector<int>& graded_rels_in_rank_order, int k) {
    double dcg = 0.0;
    const size_t limit = std::min<size_t>(graded_rels_in_rank_order.size(),
                                          k < 0 ? 0 : static_cast<size_t>(k));
    for (size_t i = 0; i < limit; ++i)
        dcg += graded_rels_in_rank_order[i] / std::log2(static_cast<double>(i) + 2.0);
    return dcg;
}

double ndcg_at_k(const RankedList& ranked,
                 const std::map<std::string, int>& qrels_for_query, int k) {
    std::vector<int> ideal;
    ideal.reserve(qrels_for_query.size());
    bool any_positive = false;
    for (const auto& [doc, grade] : qrels_for_query) {
        ideal.push_back(grade);
        if (grade > 0) any_positive = true;
    }
    if (!any_positive)
        throw DataError("ndcg_at_k: query '" + ranked.query_id +
                        "' has no positive judgment (IDCG would be 0)");
    std::sort(ideal.begin(), ideal.end(), std::greater<int>());

    std::vector<int> gains;
    gains.reserve(ranked.entries.size());
    for (const auto& e : ranked.entries) {
        auto it = qrels_for_query.find(e.doc_id);
        gains.push_back(it == qrels_for_query.end() ? 0 : it->second);
    }
    return dcg_at_k(gains, k) / dcg_at_k(ideal, k);
}

MetricReport evaluate_run(const std::vector<RankedList>& run, const Qrels& qrels,
                          const MetricConfig& cfg) {
    if (cfg.k < 1) throw ConfigError("metric cutoff k must be >= 1");

    const std::string suffix = "@" + std::to_string(cfg.k);
    MetricReport report;
    report.config = cfg;

    std::set<std::string> seen;
    for (const auto& rl : run) {
        if (!seen.insert(rl.query_id).second)
            throw DataError("evaluate_run: duplicate query '" + rl.query_id +
                            "' in run");

        const auto* judged = qrels.find(rl.query_id);
        int positives = 0;
        if (judged)
            for (const auto& [doc, grade] : *judged)
                if (grade > 0) ++positives;
        if (positives == 0) {
            if (!cfg.exclude_unjudged_queries)
                throw DataError("evaluate_run: query '" + rl.query_id +
                                "' has no positive judgment and exclusion is off");
            report.excluded_queries.push_back(rl.query_id);
            continue;
        }

        int hits = 0;
        int first_hit_rank = 0;
        const size_t limit = std::min<size_t>(rl.entries.size(),
                                              static_cast<size_t>(cfg.k));
        for (size_t i = 0; i < limit; ++i) {
            auto it = judged->find(rl.entries[i].doc_id);
            if (it != judged->end() && it->second > 0) {
                ++hits;
                if (first_hit_rank == 0) first_hit_rank = static_cast<int>(i) + 1;
            }
        }

        auto& m = report.per_query[rl.query_id];
        m["ndcg" + suffix] = ndcg_at_k(rl, *judged, cfg.k);
        m["precision" + suffix] = static_cast<double>(hits) / cfg.k;
        m["recall" + suffix] = static_cast<double>(hits) / positives;
        m["accuracy" + suffix] = hits > 0 ? 1.0 : 0.0;
        m["mrr" + suffix] = first_hit_rank > 0 ? 1.0 / first_hit_rank : 0.0;
    }

    report.num_queries_evaluated = static_cast<int>(report.per_query.size());
    if (report.num_queries_evaluated == 0)
        throw DataError("evaluate_run: no evaluable queries (every run query lacks "
                        "positive judgments)");

    // per_query is an ordered map, so the reduction order is fixed.
    for (const auto& [qid, metrics] : report.per_query)
        for (const auto& [name, value] : metrics) report.means[name] += value;
    for (auto& [name, value] : report.means) value /= report.num_queries_evaluated;

    std::sort(report.excluded_queries.begin(), report.excluded_queries.end());
    return report;
}

nlohmann::json metric_report_json(const MetricReport& report) {
    nlohmann::json j;
    j["config"]["k"] = report.config.k;
    j["config"]["exclude_unjudged_queries"] = report.config.exclude_unjudged_queries;
    j["num_queries_evaluated"] = report.num_queries_evaluated;
    j["excluded_queries"] = report.excluded_queries;
    j["means"] = report.means;
    j["per_query"] = report.per_query;
    return j;
}

std::string metric_report_csv(const MetricReport& report) {
    std::vector<std::string> names;
    for (const auto& [name, value] : report.means) names.push_back(name);

    std::ostringstream out;
    out << "query_id";
    for (const auto& n : names) out << ',' << n;
    out << '\n';
    out.setf(std::ios::fixed);
    out.precision(6);
    for (const auto& [qid, metrics] : report.per_query) {
        out << qid;
        for (const auto& n : names) out << ',' << metrics.at(n);
        out << '\n';
    }
    out << "MEAN";
    for (const auto& n : names) out << ',' << report.means.at(n);
    out << '\n';
    return out.str();
}

} // namespace finrag
