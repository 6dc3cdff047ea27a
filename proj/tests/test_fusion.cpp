#include <doctest.h>

#include <cmath>
#include <random>

#include "finrag/errors.hpp"
#include "finrag/eval.hpp"
#include "finrag/fusion.hpp"
#include "test_util.hpp"

using namespace finrag;

namespace {

RankedList list_from_scores(const std::string& qid,
                            const std::vector<std::pair<std::string, double>>& scored) {
    RankedList rl;
    rl.query_id = qid;
    auto sorted = scored;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    for (size_t i = 0; i < sorted.size(); ++i)
        rl.entries.push_back(
            RunEntry{sorted[i].first, sorted[i].second, static_cast<int>(i) + 1});
    return rl;
}

// Expected pool ordering for an endpoint: top-pool entries normalized, sorted
// by (score desc, id asc).
std::vector<std::string> pool_order(const RankedList& rl, int pool) {
    RankedList p{rl.query_id, {}};
    size_t take = std::min<size_t>(rl.entries.size(), static_cast<size_t>(pool));
    p.entries.assign(rl.entries.begin(), rl.entries.begin() + take);
    auto normalized = normalize_scores(p, Normalization::minmax);
    std::vector<std::pair<std::string, double>> v;
    for (const auto& e : normalized.entries) v.emplace_back(e.doc_id, e.score);
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::vector<std::string> ids;
    for (auto& [id, s] : v) ids.push_back(id);
    return ids;
}

} // namespace

TEST_CASE("normalize_scores minmax and degenerate cases") {
    auto rl = list_from_scores("q", {{"a", 4.0}, {"b", 2.0}, {"c", 0.0}});
    auto out = normalize_scores(rl, Normalization::minmax);
    CHECK(out.entries[0].score == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(out.entries[1].score == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(out.entries[2].score == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(testutil::doc_ids(out) == testutil::doc_ids(rl));

    auto single = normalize_scores(list_from_scores("q", {{"a", 7.3}}),
                                   Normalization::minmax);
    CHECK(single.entries[0].score == 1.0);

    auto equal = normalize_scores(
        list_from_scores("q", {{"a", 2.0}, {"b", 2.0}, {"c", 2.0}}),
        Normalization::minmax);
    for (const auto& e : equal.entries) CHECK(e.score == 1.0);

    auto none = normalize_scores(rl, Normalization::none);
    CHECK(none.entries[0].score == 4.0);
}

TEST_CASE("fuse computes the alpha-weighted total") {
    // normalized dense: hi=1, a=0.9, lo=0 ; normalized sparse: hi=1, a=0.5, lo=0
    auto dense = list_from_scores("q1", {{"hi_d", 10.0}, {"a", 9.0}, {"lo", 0.0}});
    auto sparse = list_from_scores("q1", {{"hi_s", 8.0}, {"a", 4.0}, {"lo", 0.0}});
    FusionConfig cfg;
    cfg.alpha = 0.85;
    auto fused = fuse(dense, sparse, cfg);

    double a_score = 0.0;
    for (const auto& e : fused.entries)
        if (e.doc_id == "a") a_score = e.score;
    CHECK(a_score == doctest::Approx(0.85 * 0.9 + 0.15 * 0.5).epsilon(1e-12));
    CHECK(a_score == doctest::Approx(0.84).epsilon(1e-12));

    for (const auto& e : fused.entries) {
        CHECK(e.score >= 0.0);
        CHECK(e.score <= 1.0 + 1e-12);
    }

    CHECK_THROWS_AS(fuse(list_from_scores("q1", {}), list_from_scores("q2", {}), cfg),
                    DataError);
}

TEST_CASE("fuse with normalization 'none' sums raw scores") {
    auto dense = list_from_scores("q1", {{"a", 4.0}, {"b", 1.0}});
    auto sparse = list_from_scores("q1", {{"a", 2.0}, {"c", 6.0}});
    FusionConfig cfg;
    cfg.alpha = 0.5;
    cfg.normalization = Normalization::none;
    auto fused = fuse(dense, sparse, cfg);
    REQUIRE(fused.entries.size() == 3);
    CHECK(fused.entries[0].doc_id == "a"); // 0.5*4 + 0.5*2 = 3
    CHECK(fused.entries[0].score == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(fused.entries[1].doc_id == "c"); // 0.5*6 = 3 ties with a; id breaks it
    CHECK(fused.entries[1].score == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(fused.entries[2].doc_id == "b");
    CHECK(fused.entries[2].score == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("fuse endpoints reproduce the normalized pool orderings") {
    std::mt19937 rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        auto dense = testutil::random_ranked_list(rng, "q", 15);
        auto sparse = testutil::random_ranked_list(rng, "q", 15);
        // distinct universes ensure docs missing from one side appear too
        for (auto& e : sparse.entries) e.doc_id = "s_" + e.doc_id;

        FusionConfig cfg;
        cfg.candidate_pool = 8;

        cfg.alpha = 1.0;
        auto at_one = fuse(dense, sparse, cfg);
        for (const auto& e : at_one.entries) {
            CHECK(e.score >= 0.0);
            CHECK(e.score <= 1.0 + 1e-12);
        }
        auto dense_expected = pool_order(dense, cfg.candidate_pool);
        std::vector<std::string> dense_got;
        for (const auto& e : at_one.entries) {
            if (std::find(dense_expected.begin(), dense_expected.end(), e.doc_id) !=
                dense_expected.end())
                dense_got.push_back(e.doc_id);
        }
        CHECK(dense_got == dense_expected);

        cfg.alpha = 0.0;
        auto at_zero = fuse(dense, sparse, cfg);
        auto sparse_expected = pool_order(sparse, cfg.candidate_pool);
        std::vector<std::string> sparse_got;
        for (const auto& e : at_zero.entries) {
            if (e.doc_id.rfind("s_", 0) == 0) sparse_got.push_back(e.doc_id);
        }
        CHECK(sparse_got == sparse_expected);
    }
}

TEST_CASE("fused score is affine in alpha with the expected slope") {
    std::mt19937 rng(31);
    auto dense = testutil::random_ranked_list(rng, "q", 12);
    auto sparse = testutil::random_ranked_list(rng, "q", 12);
    FusionConfig cfg;

    auto score_of = [&](double alpha, const std::string& id) {
        cfg.alpha = alpha;
        auto fused = fuse(dense, sparse, cfg);
        for (const auto& e : fused.entries)
            if (e.doc_id == id) return e.score;
        return -1.0;
    };
    cfg.alpha = 0.5;
    auto mid = fuse(dense, sparse, cfg);
    for (const auto& e : mid.entries) {
        double s0 = score_of(0.0, e.doc_id);
        double s1 = score_of(1.0, e.doc_id);
        double s_mid = score_of(0.5, e.doc_id);
        double s_quarter = score_of(0.25, e.doc_id);
        CHECK(std::abs(s_mid - (s0 + 0.5 * (s1 - s0))) < 1e-12);
        CHECK(std::abs(s_quarter - (s0 + 0.25 * (s1 - s0))) < 1e-12);
    }
}

TEST_CASE("alpha_sweep: grid shape and oracle agreement") {
    // two queries, three docs each, with different crossover thresholds
    Qrels qrels;
    qrels.judgments["q1"]["good1"] = 1;
    qrels.judgments["q2"]["good2"] = 1;

    std::vector<RankedList> dense = {
        list_from_scores("q1", {{"good1", 1.0}, {"bad1", 0.6}, {"f1", 0.0}}),
        list_from_scores("q2", {{"good2", 1.0}, {"bad2", 0.2}, {"f2", 0.0}}),
    };
    std::vector<RankedList> sparse = {
        list_from_scores("q1", {{"bad1", 1.0}, {"good1", 0.3}, {"f1", 0.0}}),
        list_from_scores("q2", {{"bad2", 1.0}, {"good2", 0.5}, {"f2", 0.0}}),
    };

    auto result = alpha_sweep(dense, sparse, qrels, 0.025);
    CHECK(result.grid.size() == 41);
    CHECK(result.grid.front().alpha == 0.0);
    CHECK(result.grid.back().alpha == 1.0);
    for (size_t i = 1; i < result.grid.size(); ++i)
        CHECK(result.grid[i].alpha > result.grid[i - 1].alpha);

    // independent re-evaluation: fuse + evaluate at every grid alpha
    double best = -1.0, best_alpha = -1.0;
    for (const auto& point : result.grid) {
        FusionConfig cfg;
        cfg.alpha = point.alpha;
        std::vector<RankedList> fused;
        for (size_t i = 0; i < dense.size(); ++i)
            fused.push_back(fuse(dense[i], sparse[i], cfg));
        auto report = evaluate_run(fused, qrels, MetricConfig{10, true});
        double score = report.means.at("ndcg@10");
        CHECK(score == doctest::Approx(point.ndcg10).epsilon(1e-12));
        if (score > best) {
            best = score;
            best_alpha = point.alpha;
        }
    }
    CHECK(result.optimal_score == doctest::Approx(best).epsilon(1e-12));
    CHECK(result.optimal_alpha == doctest::Approx(best_alpha).epsilon(1e-12));

    // the grid contains both endpoints, so the optimum dominates them
    CHECK(result.optimal_score >= result.grid.front().ndcg10);
    CHECK(result.optimal_score >= result.grid.back().ndcg10);

    CHECK_THROWS_AS(alpha_sweep(dense, sparse, qrels, 0.3), ConfigError);
    Qrels unrelated;
    unrelated.judgments["zz"]["d"] = 1;
    CHECK_THROWS_AS(alpha_sweep(dense, sparse, unrelated, 0.25), DataError);
}

TEST_CASE("sweep reports serialize") {
    SweepResult r;
    r.grid = {{0.0, 0.25}, {0.5, 0.75}, {1.0, 0.5}};
    r.optimal_alpha = 0.5;
    r.optimal_score = 0.75;
    auto j = sweep_report_json(r);
    CHECK(j.at("grid").size() == 3);
    CHECK(j.at("grid")[1].at("alpha") == 0.5);
    CHECK(j.at("optimal_alpha") == 0.5);
    CHECK(j.at("optimal_score") == 0.75);
    auto csv = sweep_report_csv(r);
    CHECK(csv.find("alpha,ndcg10\n0.000,0.250000\n") == 0);
}
