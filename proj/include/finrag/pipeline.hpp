#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "finrag/eval.hpp"
#include "finrag/fusion.hpp"
#include "finrag/preprocess.hpp"

namespace finrag {

enum class Stage {
    preprocess,
    index_sparse,
    index_dense,
    retrieve,
    fuse,
    sweep,
    rerank,
    select,
    eval,
};

/// Parses a comma-separated stage list; "index" expands to both index stages.
std::set<Stage> parse_stages(const std::string& csv);
std::string to_string(Stage s);

enum class CorpusMode { none, markdown, table_augment, table_extract };
enum class QueryMode { none, keywords, expand };

CorpusMode corpus_mode_from_string(const std::string& s);
QueryMode query_mode_from_string(const std::string& s);
std::string to_string(CorpusMode m);
std::string to_string(QueryMode m);

/// Everything one pipeline run needs, loadable from a single JSON file.
/// CLI flags override individual keys after loading.
struct PipelineConfig {
    std::filesystem::path corpus_path;
    std::filesystem::path queries_path;
    std::filesystem::path qrels_path;
    std::filesystem::path output_dir = "out";

    PreprocessConfig preprocess;
    CorpusMode corpus_mode = CorpusMode::none;
    QueryMode query_mode = QueryMode::none;
    std::filesystem::path expansion_cache; // default: <output_dir>/expansion_cache.jsonl
    nlohmann::json expansion_provider = {{"type", "identity"}};

    Bm25Params bm25;
    nlohmann::json embedding_provider = {{"type", "hashing"}, {"dim", 64}};

    int retrieve_k = 100;
    bool aggregate_chunks = true; // collapse chunk hits to parent docs (max score)
    std::string retrieve_mode = "both"; // both | sparse | dense

    FusionConfig fusion;
    double sweep_step = 0.025;

    int rerank_top_n = 20;
    nlohmann::json rerank_provider = {{"type", "identity"}};

    nlohmann::json select_provider = {{"type", "stub"}};
    std::filesystem::path select_template; // empty -> built-in template

    MetricConfig metrics;
    std::string eval_run = "auto"; // auto | reranked | hybrid | dense | sparse

    std::string run_tag = "finrag";

    static PipelineConfig from_json(const nlohmann::json& j);
    static PipelineConfig from_file(const std::filesystem::path& path);
    nlohmann::json to_json() const;

    /// Structural checks plus existence of referenced input paths for the
    /// requested stages. Throws ConfigError.
    void validate(const std::set<Stage>& stages) const;
};

struct ManifestArtifact {
    std::string path; // relative to output_dir
    std::string hash; // fnv1a64 of file bytes
};

struct RunManifest {
    std::string version;
    std::string created_at;
    std::vector<std::string> stages;
    nlohmann::json config_snapshot;
    std::map<std::string, std::string> input_hashes;
    std::vector<ManifestArtifact> artifacts;

    nlohmann::json to_json() const;
};

/// FNV-1a 64-bit over a file's bytes, hex-encoded. Stable across platforms;
/// used for manifest integrity checks.
std::string hash_file(const std::filesystem::path& path);

/// Executes the requested stages in pipeline order, each reading its inputs
/// from disk artifacts and writing its own. The manifest lands last as
/// manifest.json. Missing prerequisites raise DataError naming the stage that
/// produces the expected file. One instance per output directory (lockfile).
RunManifest run_pipeline(const PipelineConfig& cfg, const std::set<Stage>& stages);

} // namespace finrag
