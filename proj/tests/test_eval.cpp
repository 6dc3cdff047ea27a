#include <doctest.h>

#include <cmath>
#include <random>

#include "finrag/errors.hpp"
#include "finrag/eval.hpp"

using namespace finrag;

namespace {

RankedList make_list(const std::string& qid, const std::vector<std::string>& ids) {
    RankedList rl;
    rl.query_id = qid;
    for (size_t i = 0; i < ids.size(); ++i)
        rl.entries.push_back(
            RunEntry{ids[i], 1.0 - 0.01 * static_cast<double>(i),
                     static_cast<int>(i) + 1});
    return rl;
}

// Brute-force NDCG oracle, written straight from the definition with its own
// DCG loop and ideal-grade enumeration.
double oracle_ndcg(const std::vector<int>& gains_in_rank_order,
                   std::vector<int> all_judged_grades, int k) {
    double dcg = 0.0;
    for (int i = 0; i < k && i < static_cast<int>(gains_in_rank_order.size()); ++i)
        dcg += gains_in_rank_order[static_cast<size_t>(i)] *
               (1.0 / std::log2(i + 2.0));
    std::sort(all_judged_grades.begin(), all_judged_grades.end());
    std::reverse(all_judged_grades.begin(), all_judged_grades.end());
    double idcg = 0.0;
    for (int i = 0; i < k && i < static_cast<int>(all_judged_grades.size()); ++i)
        idcg += all_judged_grades[static_cast<size_t>(i)] *
                (1.0 / std::log2(i + 2.0));
    return dcg / idcg;
}

} // namespace

TEST_CASE("dcg_at_k hand cases") {
    CHECK(dcg_at_k({1, 0, 1}, 3) == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(dcg_at_k({}, 10) == 0.0);
    CHECK(dcg_at_k({3}, 10) == doctest::Approx(3.0).epsilon(1e-12));
    // cutoff truncates
    CHECK(dcg_at_k({1, 1, 1}, 1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ndcg_at_k hand case and edge rankings") {
    std::map<std::string, int> qrels{{"d1", 1}, {"d3", 1}};
    auto rl = make_list("q1", {"d1", "d2", "d3"});
    // DCG = 1.5, IDCG = 1 + 1/log2(3)
    const double expected = 1.5 / (1.0 + 1.0 / std::log2(3.0));
    CHECK(ndcg_at_k(rl, qrels, 3) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(ndcg_at_k(rl, qrels, 3) == doctest::Approx(0.91972).epsilon(1e-5));

    // ideal ordering scores exactly 1
    std::map<std::string, int> graded{{"a", 3}, {"b", 2}, {"c", 1}};
    CHECK(ndcg_at_k(make_list("q", {"a", "b", "c"}), graded, 10) ==
          doctest::Approx(1.0).epsilon(1e-12));

    // judged docs exist but none retrieved in top-k
    CHECK(ndcg_at_k(make_list("q", {"x", "y"}), graded, 10) == 0.0);

    std::map<std::string, int> all_zero{{"a", 0}, {"b", 0}};
    CHECK_THROWS_AS(ndcg_at_k(make_list("q", {"a"}), all_zero, 10), DataError);
}

TEST_CASE("ndcg matches the brute-force oracle on random instances") {
    std::mt19937 rng(123);
    std::uniform_int_distribution<int> grade(0, 3);
    std::uniform_int_distribution<int> n_docs(1, 10);
    for (int trial = 0; trial < 2000; ++trial) {
        int n = n_docs(rng);
        std::map<std::string, int> qrels;
        std::vector<int> grades;
        bool any_positive = false;
        for (int i = 0; i < n; ++i) {
            int g = grade(rng);
            qrels["d" + std::to_string(i)] = g;
            grades.push_back(g);
            if (g > 0) any_positive = true;
        }
        if (!any_positive) {
            qrels["d0"] = 1;
            grades[0] = 1;
        }

        // ranking = shuffled subset of docs plus some unjudged ids
        std::vector<std::string> ids;
        for (int i = 0; i < n; ++i) ids.push_back("d" + std::to_string(i));
        std::shuffle(ids.begin(), ids.end(), rng);
        ids.resize(1 + rng() % ids.size());
        if (rng() % 2) ids.push_back("unjudged_x");

        std::vector<int> gains;
        for (const auto& id : ids) {
            auto it = qrels.find(id);
            gains.push_back(it == qrels.end() ? 0 : it->second);
        }
        int k = 1 + static_cast<int>(rng() % 12);
        double got = ndcg_at_k(make_list("q", ids), qrels, k);
        double want = oracle_ndcg(gains, grades, k);
        CHECK(std::abs(got - want) < 1e-9);
        CHECK(got >= 0.0);
        CHECK(got <= 1.0 + 1e-12);
    }
}

TEST_CASE("swapping a worse doc above a better one lowers ndcg") {
    std::map<std::string, int> qrels{{"good", 2}, {"bad", 1}};
    double better = ndcg_at_k(make_list("q", {"good", "bad"}), qrels, 10);
    double worse = ndcg_at_k(make_list("q", {"bad", "good"}), qrels, 10);
    CHECK(better > worse);
}

TEST_CASE("unjudged tail below k never changes metrics") {
    std::map<std::string, int> qrels{{"d1", 2}, {"d2", 1}};
    Qrels q;
    q.judgments["q1"] = qrels;
    auto base = make_list("q1", {"d1", "x1", "d2"});
    auto padded = make_list("q1", {"d1", "x1", "d2", "x2", "x3", "x4"});
    MetricConfig cfg{3, true};
    auto a = evaluate_run({base}, q, cfg);
    auto b = evaluate_run({padded}, q, cfg);
    CHECK(a.means == b.means);
}

TEST_CASE("evaluate_run computes all five metrics") {
    Qrels qrels;
    qrels.judgments["q1"]["d1"] = 1;

    SUBCASE("relevant doc at rank 1") {
        auto report = evaluate_run({make_list("q1", {"d1", "x", "y"})}, qrels,
                                   MetricConfig{10, true});
        CHECK(report.num_queries_evaluated == 1);
        const auto& m = report.per_query.at("q1");
        CHECK(m.at("ndcg@10") == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(m.at("precision@10") == doctest::Approx(0.1).epsilon(1e-12));
        CHECK(m.at("recall@10") == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(m.at("accuracy@10") == 1.0);
        CHECK(m.at("mrr@10") == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("relevant doc at rank 3") {
        auto report = evaluate_run({make_list("q1", {"x", "y", "d1"})}, qrels,
                                   MetricConfig{10, true});
        CHECK(report.per_query.at("q1").at("mrr@10") ==
              doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    }
    SUBCASE("means average over evaluated queries") {
        qrels.judgments["q2"]["d9"] = 1;
        // q1 perfect (ndcg 1.0); q2 has d9 at rank 2 of a one-positive query:
        // ndcg = 1/log2(3)
        auto report = evaluate_run({make_list("q1", {"d1"}),
                                    make_list("q2", {"x", "d9"})},
                                   qrels, MetricConfig{10, true});
        const double expect = (1.0 + 1.0 / std::log2(3.0)) / 2.0;
        CHECK(report.means.at("ndcg@10") == doctest::Approx(expect).epsilon(1e-12));
    }
    SUBCASE("per-query ndcg values of 1.0 and 0.5 average to 0.75") {
        // query b: grades {2, 1}, ranking [bad-grade-1, good-grade-2] at k=2:
        // dcg = 1 + 2/log2(3), idcg = 2 + 1/log2(3)
        Qrels pair;
        pair.judgments["a"]["d"] = 1;
        pair.judgments["b"]["hi"] = 2;
        pair.judgments["b"]["lo"] = 1;
        auto report = evaluate_run({make_list("a", {"d"}),
                                    make_list("b", {"lo", "hi"})},
                                   pair, MetricConfig{2, true});
        const double ndcg_b = (1.0 + 2.0 / std::log2(3.0)) / (2.0 + 1.0 / std::log2(3.0));
        CHECK(report.means.at("ndcg@2") ==
              doctest::Approx((1.0 + ndcg_b) / 2.0).epsilon(1e-12));
    }
    SUBCASE("queries without positives are excluded and listed") {
        qrels.judgments["q_zero"]["d1"] = 0;
        auto report = evaluate_run({make_list("q1", {"d1"}),
                                    make_list("q_zero", {"d1"}),
                                    make_list("q_unknown", {"d1"})},
                                   qrels, MetricConfig{10, true});
        CHECK(report.num_queries_evaluated == 1);
        CHECK(report.excluded_queries ==
              std::vector<std::string>{"q_unknown", "q_zero"});

        CHECK_THROWS_AS(evaluate_run({make_list("q_zero", {"d1"})}, qrels,
                                     MetricConfig{10, true}),
                        DataError);
        CHECK_THROWS_AS(evaluate_run({make_list("q1", {"d1"}),
                                      make_list("q_zero", {"d1"})},
                                     qrels, MetricConfig{10, false}),
                        DataError);
    }
}

TEST_CASE("precision/recall consistency identity") {
    std::mt19937 rng(77);
    std::uniform_int_distribution<int> grade(0, 2);
    for (int trial = 0; trial < 200; ++trial) {
        Qrels qrels;
        int positives = 0;
        for (int i = 0; i < 8; ++i) {
            int g = grade(rng);
            qrels.judgments["q"]["d" + std::to_string(i)] = g;
            if (g > 0) ++positives;
        }
        if (positives == 0) {
            qrels.judgments["q"]["d0"] = 1;
            positives = 1;
        }
        std::vector<std::string> ids;
        for (int i = 0; i < 8; ++i) ids.push_back("d" + std::to_string(i));
        std::shuffle(ids.begin(), ids.end(), rng);
        int k = 1 + static_cast<int>(rng() % 10);
        auto report =
            evaluate_run({make_list("q", ids)}, qrels, MetricConfig{k, true});
        const auto& m = report.per_query.at("q");
        const std::string suffix = "@" + std::to_string(k);
        CHECK(std::abs(m.at("precision" + suffix) * k -
                       m.at("recall" + suffix) * positives) < 1e-9);
    }
}

TEST_CASE("metric report serializes to json and csv") {
    Qrels qrels;
    qrels.judgments["q1"]["d1"] = 1;
    auto report =
        evaluate_run({make_list("q1", {"d1"})}, qrels, MetricConfig{10, true});
    auto j = metric_report_json(report);
    CHECK(j.at("num_queries_evaluated") == 1);
    CHECK(j.at("means").at("ndcg@10") == 1.0);
    CHECK(j.at("per_query").at("q1").at("mrr@10") == 1.0);
    auto csv = metric_report_csv(report);
    CHECK(csv.find("query_id,accuracy@10") == 0);
    CHECK(csv.find("\nMEAN,") != std::string::npos);
}
