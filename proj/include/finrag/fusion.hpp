#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "finrag/types.hpp"

namespace finrag {

enum class Normalization { minmax, none };

Normalization normalization_from_string(const std::string& s);
std::string to_string(Normalization n);

struct FusionConfig {
    double alpha = 0.5;        // weight of the dense score
    int candidate_pool = 100;  // entries taken from the top of each list
    Normalization normalization = Normalization::minmax;

    void validate() const; // throws ConfigError unless 0 <= alpha <= 1 etc.
};

/// Min-max maps scores affinely onto [0, 1] per list (max -> 1, min -> 0);
/// single-entry and all-equal lists map every score to 1.0. Order and ids are
/// untouched. Mode `none` is the identity.
RankedList normalize_scores(const RankedList& rl, Normalization mode);

/// The linear hybrid: candidates are the union of each list's top
/// candidate_pool entries; each pooled list is normalized per the config; a
/// document missing from one side scores 0 there; total =
/// alpha * dense + (1 - alpha) * sparse, sorted descending with ties by
/// ascending doc id. Both lists must carry the same query_id.
RankedList fuse(const RankedList& dense, const RankedList& sparse,
                const FusionConfig& cfg);

struct SweepPoint {
    double alpha = 0.0;
    double ndcg10 = 0.0;
};

struct SweepResult {
    std::vector<SweepPoint> grid; // alphas strictly increasing
    double optimal_alpha = 0.0;
    double optimal_score = 0.0;
};

/// Evaluates mean NDCG@10 of the fused run at every alpha on the grid
/// {0, step, 2*step, ..., 1} (41 points at the 0.025 default). The argmax
/// wins; ties go to the smaller alpha. step must divide 1 into an integer
/// number of cells.
SweepResult alpha_sweep(const std::vector<RankedList>& dense_runs,
                        const std::vector<RankedList>& sparse_runs,
                        const Qrels& qrels, double step = 0.025,
                        const FusionConfig& base = {});

nlohmann::json sweep_report_json(const SweepResult& result);
std::string sweep_report_csv(const SweepResult& result);

} // namespace finrag
