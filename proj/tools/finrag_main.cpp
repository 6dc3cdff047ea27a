#include <iostream>
#include <optional>
#include <set>
#include <string>

#include <CLI11.hpp>

#include "finrag/errors.hpp"
#include "finrag/pipeline.hpp"

namespace {

using finrag::PipelineConfig;
using finrag::Stage;

struct Overrides {
    std::optional<std::string> corpus, queries, qrels, output_dir;
    std::optional<std::string> corpus_mode, query_mode, retrieve_mode, eval_run, tag;
    std::optional<double> alpha, sweep_step;
    std::optional<int> retrieve_k, eval_k, rerank_top_n, max_tokens;
};

// Flags beat config-file keys; anything not flagged keeps the file's value.
void apply(const Overrides& ov, PipelineConfig& cfg) {
    if (ov.corpus) cfg.corpus_path = *ov.corpus;
    if (ov.queries) cfg.queries_path = *ov.queries;
    if (ov.qrels) cfg.qrels_path = *ov.qrels;
    if (ov.output_dir) cfg.output_dir = *ov.output_dir;
    if (ov.corpus_mode) cfg.corpus_mode = finrag::corpus_mode_from_string(*ov.corpus_mode);
    if (ov.query_mode) cfg.query_mode = finrag::query_mode_from_string(*ov.query_mode);
    if (ov.retrieve_mode) cfg.retrieve_mode = *ov.retrieve_mode;
    if (ov.eval_run) cfg.eval_run = *ov.eval_run;
    if (ov.tag) cfg.run_tag = *ov.tag;
    if (ov.alpha) cfg.fusion.alpha = *ov.alpha;
    if (ov.sweep_step) cfg.sweep_step = *ov.sweep_step;
    if (ov.retrieve_k) cfg.retrieve_k = *ov.retrieve_k;
    if (ov.eval_k) cfg.metrics.k = *ov.eval_k;
    if (ov.rerank_top_n) cfg.rerank_top_n = *ov.rerank_top_n;
    if (ov.max_tokens) cfg.preprocess.max_tokens = *ov.max_tokens;
}

void add_common_options(CLI::App* cmd, std::string& config_path, Overrides& ov) {
    cmd->add_option("-c,--config", config_path, "pipeline config file (JSON)")
        ->required();
    cmd->add_option("--corpus", ov.corpus, "override data.corpus");
    cmd->add_option("--queries", ov.queries, "override data.queries");
    cmd->add_option("--qrels", ov.qrels, "override data.qrels");
    cmd->add_option("-o,--output-dir", ov.output_dir, "override output_dir");
    cmd->add_option("--corpus-mode", ov.corpus_mode,
                    "override preprocess.corpus_mode "
                    "(default|markdown|table_augment|table_extract)");
    cmd->add_option("--query-mode", ov.query_mode,
                    "override preprocess.query_mode (default|keywords|expand)");
    cmd->add_option("--alpha", ov.alpha,
                    "override fusion.alpha (weight of the dense score; the sparse "
                    "side gets 1-alpha)");
    cmd->add_option("--retrieve-k", ov.retrieve_k, "override retrieve.k");
    cmd->add_option("--eval-k", ov.eval_k, "override eval.k");
    cmd->add_option("--rerank-top-n", ov.rerank_top_n, "override rerank.top_n");
    cmd->add_option("--max-tokens", ov.max_tokens, "override preprocess.max_tokens");
    cmd->add_option("--tag", ov.tag, "override run tag");
}

int run_stages(const std::string& config_path, const Overrides& ov,
               const std::set<Stage>& stages) {
    auto cfg = PipelineConfig::from_file(config_path);
    apply(ov, cfg);
    auto manifest = finrag::run_pipeline(cfg, stages);
    std::cout << "wrote " << manifest.artifacts.size() << " artifact(s) under "
              << cfg.output_dir.string() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "finrag: hybrid dense+sparse retrieval and evaluation for financial QA "
        "corpora"};
    app.require_subcommand(1);

    std::string config_path;
    Overrides ov;
    std::string stages_csv = "preprocess,index,retrieve,fuse,rerank,select,eval";

    auto* validate = app.add_subcommand("validate-config",
                                        "parse and validate a config file");
    add_common_options(validate, config_path, ov);

    auto* preprocess = app.add_subcommand(
        "preprocess", "chunk the corpus and preprocess queries");
    add_common_options(preprocess, config_path, ov);

    auto* index_sparse =
        app.add_subcommand("index-sparse", "build the BM25 inverted index");
    add_common_options(index_sparse, config_path, ov);

    auto* index_dense =
        app.add_subcommand("index-dense", "embed chunks and build the vector index");
    add_common_options(index_dense, config_path, ov);

    auto* search = app.add_subcommand(
        "search", "run sparse/dense retrieval over the indexes, writing TREC runs");
    add_common_options(search, config_path, ov);
    search->add_option("--mode", ov.retrieve_mode, "both|sparse|dense");

    auto* fuse_cmd = app.add_subcommand(
        "fuse", "combine the dense and sparse runs (alpha weights dense)");
    add_common_options(fuse_cmd, config_path, ov);

    auto* sweep = app.add_subcommand(
        "sweep", "grid-search alpha against NDCG@10 and report the optimum");
    add_common_options(sweep, config_path, ov);
    sweep->add_option("--step", ov.sweep_step, "grid step (default 0.025)");

    auto* rerank_cmd =
        app.add_subcommand("rerank", "rescore the top fused candidates");
    add_common_options(rerank_cmd, config_path, ov);

    auto* select = app.add_subcommand(
        "select", "run the selection agent over the top-10 reranked documents");
    add_common_options(select, config_path, ov);

    auto* eval_cmd =
        app.add_subcommand("eval", "score a run against qrels (NDCG/P/R/Acc/MRR)");
    add_common_options(eval_cmd, config_path, ov);
    eval_cmd->add_option("--run-name", ov.eval_run,
                         "which run to score (auto|reranked|hybrid|dense|sparse)");

    auto* run = app.add_subcommand("run", "execute a stage set in pipeline order");
    add_common_options(run, config_path, ov);
    run->add_option("--stages", stages_csv,
                    "comma-separated stages (preprocess,index,index-sparse,index-dense,"
                    "retrieve,fuse,sweep,rerank,select,eval)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (validate->parsed()) {
            auto cfg = PipelineConfig::from_file(config_path);
            apply(ov, cfg);
            cfg.validate({});
            std::cout << cfg.to_json().dump(2) << "\n";
            return 0;
        }
        if (preprocess->parsed())
            return run_stages(config_path, ov, {Stage::preprocess});
        if (index_sparse->parsed())
            return run_stages(config_path, ov, {Stage::index_sparse});
        if (index_dense->parsed())
            return run_stages(config_path, ov, {Stage::index_dense});
        if (search->parsed()) return run_stages(config_path, ov, {Stage::retrieve});
        if (fuse_cmd->parsed()) return run_stages(config_path, ov, {Stage::fuse});
        if (sweep->parsed()) return run_stages(config_path, ov, {Stage::sweep});
        if (rerank_cmd->parsed()) return run_stages(config_path, ov, {Stage::rerank});
        if (select->parsed()) return run_stages(config_path, ov, {Stage::select});
        if (eval_cmd->parsed()) return run_stages(config_path, ov, {Stage::eval});
        if (run->parsed())
            return run_stages(config_path, ov, finrag::parse_stages(stages_csv));
    } catch (const finrag::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const finrag::ProviderError& e) {
        std::cerr << "provider error: " << e.what() << "\n";
        return 3;
    } catch (const finrag::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
