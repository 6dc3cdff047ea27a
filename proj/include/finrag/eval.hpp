#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "finrag/types.hpp"

namespace finrag {

struct MetricConfig {
    int k = 10;
    bool exclude_unjudged_queries = true; // skip queries with no positive grade
};

struct MetricReport {
    std::map<std::string, std::map<std::string, double>> per_query;
    std::map<std::string, double> means;
    std::vector<std::string> excluded_queries;
    int num_queries_evaluated = 0;
    MetricConfig config;
};

/// Sum over the first min(k, n) grades of rel_i / log2(i + 1); gain is linear
/// in the grade.
double dcg_at_k(const std::vector<int>& graded_rels_in_rank_order, int k);

/// DCG of the ranking's grade sequence (unjudged docs count 0) over the IDCG
/// of all judged grades sorted descending, truncated at k. Throws DataError
/// when the query has no positive grade (IDCG would be 0).
double ndcg_at_k(const RankedList& ranked,
                 const std::map<std::string, int>& qrels_for_query, int k);

/// Per-query NDCG/Precision/Recall/Accuracy/MRR at cfg.k plus their means.
/// Queries without positive judgments are excluded (and listed) when
/// cfg.exclude_unjudged_queries; otherwise they are an error. Zero evaluable
/// queries is always an error.
MetricReport evaluate_run(const std::vector<RankedList>& run, const Qrels& qrels,
                          const MetricConfig& cfg);

nlohmann::json metric_report_json(const MetricReport& report);
std::string metric_report_csv(const MetricReport& report);

} // namespace finrag
