#include "finrag/pipeline.hpp"

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>
#include <unordered_map>

#include "finrag/corpus_io.hpp"
#include "finrag/dense_index.hpp"
#include "finrag/errors.hpp"
#include "finrag/postretrieval.hpp"
#include "finrag/providers.hpp"
#include "finrag/sparse_index.hpp"

namespace finrag {

namespace {

using nlohmann::json;

const char* kVersion = "finrag 0.1.0";

struct StagePaths {
    std::filesystem::path out;
    std::filesystem::path chunks() const { return out / "chunks.jsonl"; }
    std::filesystem::path queries_pp() const { return out / "queries_preprocessed.jsonl"; }
    std::filesystem::path sparse_index() const { return out / "sparse_index.json"; }
    std::filesystem::path dense_index() const { return out / "dense_index.json"; }
    std::filesystem::path runs_dir() const { return out / "runs"; }
    std::filesystem::path dense_run() const { return runs_dir() / "dense.run"; }
    std::filesystem::path sparse_run() const { return runs_dir() / "sparse.run"; }
    std::filesystem::path hybrid_run() const { return runs_dir() / "hybrid.run"; }
    std::filesystem::path reranked_run() const { return runs_dir() / "reranked.run"; }
    std::filesystem::path sweep_json() const { return out / "sweep.json"; }
    std::filesystem::path sweep_csv() const { return out / "sweep.csv"; }
    std::filesystem::path selections() const { return out / "selections.jsonl"; }
    std::filesystem::path metrics_json() const { return out / "metrics.json"; }
    std::filesystem::path metrics_csv() const { return out / "metrics.csv"; }
    std::filesystem::path manifest() const { return out / "manifest.json"; }
    std::filesystem::path lock() const { return out / ".finrag.lock"; }
};

void require_artifact(const std::filesystem::path& path, const std::string& consumer,
                      const std::string& producer) {
    if (!std::filesystem::exists(path))
        throw DataError("stage '" + consumer + "' requires " + path.string() +
                        "; run stage '" + producer + "' first");
}

void write_text(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << content;
    if (!out.flush()) throw DataError("failed writing " + path.string());
}

// Chunk artifact IO (own JSONL schema; _id keeps BEIR-style naming).
void save_chunks(const std::vector<Chunk>& chunks, const std::filesystem::path& path) {
    std::ostringstream out;
    for (const auto& c : chunks) {
        json j;
        j["_id"] = c.id;
        j["doc_id"] = c.doc_id;
        j["seq"] = c.seq;
        j["text"] = c.text;
        j["token_count"] = c.token_count;
        out << j.dump() << '\n';
    }
    write_text(path, out.str());
}

std::vector<Chunk> load_chunks(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open chunks file: " + path.string());
    std::vector<Chunk> chunks;
    std::set<std::string> seen;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw DataError(path.string() + ":" + std::to_string(line_no) +
                            ": malformed chunk line");
        Chunk c;
        c.id = j.at("_id").get<std::string>();
        c.doc_id = j.at("doc_id").get<std::string>();
        c.seq = j.at("seq").get<int>();
        c.text = j.at("text").get<std::string>();
        c.token_count = j.at("token_count").get<int>();
        if (!seen.insert(c.id).second)
            throw DataError(path.string() + ": duplicate chunk id '" + c.id + "'");
        chunks.push_back(std::move(c));
    }
    if (chunks.empty()) throw DataError("chunks file is empty: " + path.string());
    return chunks;
}

void save_queries_jsonl(const std::vector<Query>& queries,
                        const std::filesystem::path& path) {
    std::ostringstream out;
    for (const auto& q : queries) {
        json j;
        j["_id"] = q.id;
        j["text"] = q.text;
        out << j.dump() << '\n';
    }
    write_text(path, out.str());
}

// Collapses chunk-level hits onto parent documents, keeping each document's
// best chunk score, then re-sorts by (score desc, doc id asc).
RankedList aggregate_to_documents(const RankedList& chunk_hits,
                                  const std::unordered_map<std::string, std::string>& doc_of,
                                  int k) {
    std::map<std::string, double> best;
    for (const auto& e : chunk_hits.entries) {
        auto it = doc_of.find(e.doc_id);
        if (it == doc_of.end())
            throw DataError("run entry '" + e.doc_id + "' is not a known chunk id");
        auto [bit, inserted] = best.emplace(it->second, e.score);
        if (!inserted) bit->second = std::max(bit->second, e.score);
    }
    std::vector<std::pair<std::string, double>> docs(best.begin(), best.end());
    std::sort(docs.begin(), docs.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    RankedList out;
    out.query_id = chunk_hits.query_id;
    for (const auto& [doc, score] : docs) {
        if (static_cast<int>(out.entries.size()) >= k) break;
        out.entries.push_back(
            RunEntry{doc, score, static_cast<int>(out.entries.size()) + 1});
    }
    return out;
}

// Candidate texts for rerank/select: chunk ids resolve to chunk text, parent
// doc ids to the space-joined chunk texts in seq order.
std::unordered_map<std::string, std::string> build_text_lookup(
    const std::vector<Chunk>& chunks) {
    std::unordered_map<std::string, std::string> texts;
    std::map<std::string, std::map<int, const std::string*>> per_doc;
    for (const auto& c : chunks) {
        texts[c.id] = c.text;
        per_doc[c.doc_id][c.seq] = &c.text;
    }
    for (const auto& [doc, parts] : per_doc) {
        std::string joined;
        for (const auto& [seq, text] : parts) {
            if (!joined.empty()) joined.push_back(' ');
            joined += *text;
        }
        texts[doc] = std::move(joined);
    }
    return texts;
}

struct LockFile {
    std::filesystem::path path;
    explicit LockFile(const std::filesystem::path& p) : path(p) {
        std::FILE* f = std::fopen(path.string().c_str(), "wx");
        if (!f)
            throw ConfigError("output directory is in use (lockfile exists): " +
                              path.string());
        std::fclose(f);
    }
    ~LockFile() {
        std::error_code ec;
        std::filesystem::remove(path, ec);
    }
};

std::string iso8601_utc_now() {
    std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

} // namespace

std::string to_string(Stage s) {
    switch (s) {
        case Stage::preprocess: return "preprocess";
        case Stage::index_sparse: return "index-sparse";
        case Stage::index_dense: return "index-dense";
        case Stage::retrieve: return "retrieve";
        case Stage::fuse: return "fuse";
        case Stage::sweep: return "sweep";
        case Stage::rerank: return "rerank";
        case Stage::select: return "select";
        case Stage::eval: return "eval";
    }
    return "?";
}

std::set<Stage> parse_stages(const std::string& csv) {
    std::set<Stage> stages;
    std::istringstream ss(csv);
    std::string name;
    while (std::getline(ss, name, ',')) {
        if (name.empty()) continue;
        if (name == "preprocess") stages.insert(Stage::preprocess);
        else if (name == "index") {
            stages.insert(Stage::index_sparse);
            stages.insert(Stage::index_dense);
        } else if (name == "index-sparse") stages.insert(Stage::index_sparse);
        else if (name == "index-dense") stages.insert(Stage::index_dense);
        else if (name == "retrieve") stages.insert(Stage::retrieve);
        else if (name == "fuse") stages.insert(Stage::fuse);
        else if (name == "sweep") stages.insert(Stage::sweep);
        else if (name == "rerank") stages.insert(Stage::rerank);
        else if (name == "select") stages.insert(Stage::select);
        else if (name == "eval") stages.insert(Stage::eval);
        else throw ConfigError("unknown stage '" + name + "'");
    }
    if (stages.empty()) throw ConfigError("no stages requested");
    return stages;
}

CorpusMode corpus_mode_from_string(const std::string& s) {
    if (s == "default") return CorpusMode::none;
    if (s == "markdown") return CorpusMode::markdown;
    if (s == "table_augment") return CorpusMode::table_augment;
    if (s == "table_extract") return CorpusMode::table_extract;
    throw ConfigError("unknown corpus mode '" + s +
                      "' (default|markdown|table_augment|table_extract)");
}

QueryMode query_mode_from_string(const std::string& s) {
    if (s == "default") return QueryMode::none;
    if (s == "keywords") return QueryMode::keywords;
    if (s == "expand") return QueryMode::expand;
    throw ConfigError("unknown query mode '" + s + "' (default|keywords|expand)");
}

std::string to_string(CorpusMode m) {
    switch (m) {
        case CorpusMode::none: return "default";
        case CorpusMode::markdown: return "markdown";
        case CorpusMode::table_augment: return "table_augment";
        case CorpusMode::table_extract: return "table_extract";
    }
    return "?";
}

std::string to_string(QueryMode m) {
    switch (m) {
        case QueryMode::none: return "default";
        case QueryMode::keywords: return "keywords";
        case QueryMode::expand: return "expand";
    }
    return "?";
}

namespace {

void check_keys(const json& j, const std::string& where,
                std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        bool ok = false;
        for (const char* a : allowed)
            if (key == a) ok = true;
        if (!ok) throw ConfigError("unknown config key '" + where + "." + key + "'");
    }
}

} // namespace

PipelineConfig PipelineConfig::from_json(const json& j) {
    check_keys(j, "config",
               {"data", "output_dir", "preprocess", "sparse", "dense", "retrieve",
                "fusion", "sweep", "rerank", "select", "eval", "tag"});
    PipelineConfig cfg;

    if (j.contains("data")) {
        const auto& d = j.at("data");
        check_keys(d, "data", {"corpus", "queries", "qrels"});
        if (d.contains("corpus")) cfg.corpus_path = d.at("corpus").get<std::string>();
        if (d.contains("queries")) cfg.queries_path = d.at("queries").get<std::string>();
        if (d.contains("qrels")) cfg.qrels_path = d.at("qrels").get<std::string>();
    }
    if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();

    if (j.contains("preprocess")) {
        const auto& p = j.at("preprocess");
        check_keys(p, "preprocess",
                   {"max_tokens", "chunk_overlap", "keyword_top_k", "stopwords",
                    "corpus_mode", "query_mode", "expansion_cache", "expansion_provider"});
        cfg.preprocess.max_tokens = p.value("max_tokens", cfg.preprocess.max_tokens);
        cfg.preprocess.chunk_overlap =
            p.value("chunk_overlap", cfg.preprocess.chunk_overlap);
        cfg.preprocess.keyword_top_k =
            p.value("keyword_top_k", cfg.preprocess.keyword_top_k);
        if (p.contains("stopwords")) {
            auto words = p.at("stopwords").get<std::vector<std::string>>();
            cfg.preprocess.stopwords.insert(words.begin(), words.end());
        }
        if (p.contains("corpus_mode"))
            cfg.corpus_mode = corpus_mode_from_string(p.at("corpus_mode").get<std::string>());
        if (p.contains("query_mode"))
            cfg.query_mode = query_mode_from_string(p.at("query_mode").get<std::string>());
        if (p.contains("expansion_cache"))
            cfg.expansion_cache = p.at("expansion_cache").get<std::string>();
        if (p.contains("expansion_provider"))
            cfg.expansion_provider = p.at("expansion_provider");
    }

    if (j.contains("sparse")) {
        const auto& s = j.at("sparse");
        check_keys(s, "sparse", {"k1", "b"});
        cfg.bm25.k1 = s.value("k1", cfg.bm25.k1);
        cfg.bm25.b = s.value("b", cfg.bm25.b);
    }
    if (j.contains("dense")) {
        const auto& d = j.at("dense");
        check_keys(d, "dense", {"provider"});
        if (d.contains("provider")) cfg.embedding_provider = d.at("provider");
    }
    if (j.contains("retrieve")) {
        const auto& r = j.at("retrieve");
        check_keys(r, "retrieve", {"k", "aggregate_chunks", "mode"});
        cfg.retrieve_k = r.value("k", cfg.retrieve_k);
        cfg.aggregate_chunks = r.value("aggregate_chunks", cfg.aggregate_chunks);
        if (r.contains("mode")) cfg.retrieve_mode = r.at("mode").get<std::string>();
    }
    if (j.contains("fusion")) {
        const auto& f = j.at("fusion");
        check_keys(f, "fusion", {"alpha", "candidate_pool", "normalization"});
        cfg.fusion.alpha = f.value("alpha", cfg.fusion.alpha);
        cfg.fusion.candidate_pool = f.value("candidate_pool", cfg.fusion.candidate_pool);
        if (f.contains("normalization"))
            cfg.fusion.normalization =
                normalization_from_string(f.at("normalization").get<std::string>());
    }
    if (j.contains("sweep")) {
        const auto& s = j.at("sweep");
        check_keys(s, "sweep", {"step"});
        cfg.sweep_step = s.value("step", cfg.sweep_step);
    }
    if (j.contains("rerank")) {
        const auto& r = j.at("rerank");
        check_keys(r, "rerank", {"top_n", "provider"});
        cfg.rerank_top_n = r.value("top_n", cfg.rerank_top_n);
        if (r.contains("provider")) cfg.rerank_provider = r.at("provider");
    }
    if (j.contains("select")) {
        const auto& s = j.at("select");
        check_keys(s, "select", {"provider", "template"});
        if (s.contains("provider")) cfg.select_provider = s.at("provider");
        if (s.contains("template"))
            cfg.select_template = s.at("template").get<std::string>();
    }
    if (j.contains("eval")) {
        const auto& e = j.at("eval");
        check_keys(e, "eval", {"k", "exclude_unjudged", "run"});
        cfg.metrics.k = e.value("k", cfg.metrics.k);
        cfg.metrics.exclude_unjudged_queries =
            e.value("exclude_unjudged", cfg.metrics.exclude_unjudged_queries);
        cfg.eval_run = e.value("run", cfg.eval_run);
    }
    if (j.contains("tag")) cfg.run_tag = j.at("tag").get<std::string>();
    return cfg;
}

PipelineConfig PipelineConfig::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded())
        throw ConfigError("config file is not valid JSON: " + path.string());
    return from_json(j);
}

json PipelineConfig::to_json() const {
    json j;
    j["data"]["corpus"] = corpus_path.string();
    j["data"]["queries"] = queries_path.string();
    j["data"]["qrels"] = qrels_path.string();
    j["output_dir"] = output_dir.string();
    j["preprocess"]["max_tokens"] = preprocess.max_tokens;
    j["preprocess"]["chunk_overlap"] = preprocess.chunk_overlap;
    j["preprocess"]["keyword_top_k"] = preprocess.keyword_top_k;
    if (!preprocess.stopwords.empty())
        j["preprocess"]["stopwords"] =
            std::vector<std::string>(preprocess.stopwords.begin(),
                                     preprocess.stopwords.end());
    j["preprocess"]["corpus_mode"] = to_string(corpus_mode);
    j["preprocess"]["query_mode"] = to_string(query_mode);
    if (!expansion_cache.empty())
        j["preprocess"]["expansion_cache"] = expansion_cache.string();
    j["preprocess"]["expansion_provider"] = expansion_provider;
    j["sparse"]["k1"] = bm25.k1;
    j["sparse"]["b"] = bm25.b;
    j["dense"]["provider"] = embedding_provider;
    j["retrieve"]["k"] = retrieve_k;
    j["retrieve"]["aggregate_chunks"] = aggregate_chunks;
    j["retrieve"]["mode"] = retrieve_mode;
    j["fusion"]["alpha"] = fusion.alpha;
    j["fusion"]["candidate_pool"] = fusion.candidate_pool;
    j["fusion"]["normalization"] = to_string(fusion.normalization);
    j["sweep"]["step"] = sweep_step;
    j["rerank"]["top_n"] = rerank_top_n;
    j["rerank"]["provider"] = rerank_provider;
    j["select"]["provider"] = select_provider;
    if (!select_template.empty()) j["select"]["template"] = select_template.string();
    j["eval"]["k"] = metrics.k;
    j["eval"]["exclude_unjudged"] = metrics.exclude_unjudged_queries;
    j["eval"]["run"] = eval_run;
    j["tag"] = run_tag;
    return j;
}

void PipelineConfig::validate(const std::set<Stage>& stages) const {
    preprocess.validate();
    fusion.validate();
    if (bm25.k1 < 0.0) throw ConfigError("bm25 k1 must be >= 0");
    if (bm25.b < 0.0 || bm25.b > 1.0) throw ConfigError("bm25 b must lie in [0, 1]");
    if (retrieve_k < 1) throw ConfigError("retrieve k must be >= 1");
    if (rerank_top_n < 1) throw ConfigError("rerank top_n must be >= 1");
    if (metrics.k < 1) throw ConfigError("eval k must be >= 1");
    if (retrieve_mode != "both" && retrieve_mode != "sparse" && retrieve_mode != "dense")
        throw ConfigError("retrieve mode must be both|sparse|dense");
    if (eval_run != "auto" && eval_run != "reranked" && eval_run != "hybrid" &&
        eval_run != "dense" && eval_run != "sparse")
        throw ConfigError("eval run must be auto|reranked|hybrid|dense|sparse");
    if (output_dir.empty()) throw ConfigError("output_dir must be set");

    auto require_input = [](const std::filesystem::path& p, const char* what) {
        if (p.empty()) throw ConfigError(std::string("config: data.") + what + " not set");
        if (!std::filesystem::exists(p))
            throw ConfigError(std::string("config: data.") + what +
                              " does not exist: " + p.string());
    };
    if (stages.count(Stage::preprocess)) {
        require_input(corpus_path, "corpus");
        require_input(queries_path, "queries");
    }
    if (stages.count(Stage::sweep) || stages.count(Stage::eval))
        require_input(qrels_path, "qrels");

    // any referenced path must exist even when no stage consumes it yet
    if (!corpus_path.empty()) require_input(corpus_path, "corpus");
    if (!queries_path.empty()) require_input(queries_path, "queries");
    if (!qrels_path.empty()) require_input(qrels_path, "qrels");
}

std::string hash_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot hash missing file: " + path.string());
    uint64_t h = 1469598103934665603ULL;
    char buf[1 << 16];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ULL;
        }
        if (got < static_cast<std::streamsize>(sizeof(buf))) break;
    }
    char hex[32];
    std::snprintf(hex, sizeof(hex), "fnv1a:%016llx", static_cast<unsigned long long>(h));
    return hex;
}

json RunManifest::to_json() const {
    json j;
    j["version"] = version;
    j["created_at"] = created_at;
    j["stages"] = stages;
    j["config"] = config_snapshot;
    j["inputs"] = input_hashes;
    auto& arr = j["artifacts"] = json::array();
    for (const auto& a : artifacts) arr.push_back({{"path", a.path}, {"hash", a.hash}});
    return j;
}

namespace {

struct PipelineRun {
    const PipelineConfig& cfg;
    StagePaths paths;
    std::vector<std::string> artifacts; // relative paths, in creation order

    void record(const std::filesystem::path& p) {
        artifacts.push_back(std::filesystem::relative(p, paths.out).string());
    }

    std::filesystem::path expansion_cache_path() const {
        return cfg.expansion_cache.empty() ? paths.out / "expansion_cache.jsonl"
                                           : cfg.expansion_cache;
    }

    void run_preprocess() {
        auto docs = load_corpus(cfg.corpus_path);
        std::vector<std::string> warnings;

        for (auto& doc : docs) {
            switch (cfg.corpus_mode) {
                case CorpusMode::none: break;
                case CorpusMode::markdown:
                    doc.text = restructure_markdown(doc.text);
                    break;
                case CorpusMode::table_augment: {
                    json j = json::parse(doc.text, nullptr, false);
                    if (!j.is_discarded() && j.is_object() && j.contains("cells")) {
                        auto lines = augment_table(table_from_json(j));
                        std::string joined;
                        for (const auto& l : lines) {
                            if (!joined.empty()) joined.push_back('\n');
                            joined += l;
                        }
                        if (!joined.empty()) doc.text = std::move(joined);
                    }
                    break;
                }
                case CorpusMode::table_extract: {
                    auto tables = extract_tables(doc.text);
                    if (tables.empty())
                        warnings.push_back("document '" + doc.id +
                                           "' has no table; keeping full text");
                    else
                        doc.text = std::move(tables);
                    break;
                }
            }
        }

        std::vector<Chunk> chunks;
        for (const auto& doc : docs) {
            auto dc = chunk_document(doc, cfg.preprocess, &warnings);
            chunks.insert(chunks.end(), std::make_move_iterator(dc.begin()),
                          std::make_move_iterator(dc.end()));
        }
        if (chunks.empty()) throw DataError("preprocess produced zero chunks");
        save_chunks(chunks, paths.chunks());
        record(paths.chunks());

        auto queries = load_queries(cfg.queries_path);
        switch (cfg.query_mode) {
            case QueryMode::none: break;
            case QueryMode::keywords: {
                auto idx = build_sparse_index(chunks, cfg.bm25.k1, cfg.bm25.b);
                for (auto& q : queries)
                    q.text = extract_keywords(q, cfg.preprocess, idx, &warnings);
                break;
            }
            case QueryMode::expand: {
                auto provider = make_transform_provider(cfg.expansion_provider);
                auto cache = expansion_cache_path();
                for (auto& q : queries) q.text = expand_query(q, *provider, cache);
                if (std::filesystem::exists(cache) &&
                    cache.parent_path() == paths.out)
                    record(cache);
                break;
            }
        }
        save_queries_jsonl(queries, paths.queries_pp());
        record(paths.queries_pp());

        for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    }

    void run_index_sparse() {
        require_artifact(paths.chunks(), "index-sparse", "preprocess");
        auto chunks = load_chunks(paths.chunks());
        auto idx = build_sparse_index(chunks, cfg.bm25.k1, cfg.bm25.b);
        save_sparse_index(idx, paths.sparse_index());
        record(paths.sparse_index());
    }

    void run_index_dense() {
        require_artifact(paths.chunks(), "index-dense", "preprocess");
        auto chunks = load_chunks(paths.chunks());
        auto provider = make_embedding_provider(cfg.embedding_provider);
        auto idx = build_dense_index(chunks, *provider);
        save_dense_index(idx, paths.dense_index());
        record(paths.dense_index());
    }

    void run_retrieve() {
        require_artifact(paths.queries_pp(), "retrieve", "preprocess");
        auto queries = load_queries(paths.queries_pp());

        std::unordered_map<std::string, std::string> doc_of;
        if (cfg.aggregate_chunks) {
            require_artifact(paths.chunks(), "retrieve", "preprocess");
            for (const auto& c : load_chunks(paths.chunks())) doc_of[c.id] = c.doc_id;
        }

        auto finalize = [&](RankedList rl) {
            if (!cfg.aggregate_chunks) return rl;
            return aggregate_to_documents(rl, doc_of, cfg.retrieve_k);
        };

        const bool do_sparse = cfg.retrieve_mode != "dense";
        const bool do_dense = cfg.retrieve_mode != "sparse";

        if (do_sparse) {
            require_artifact(paths.sparse_index(), "retrieve", "index-sparse");
            auto idx = load_sparse_index(paths.sparse_index());
            // With aggregation on, rank every chunk so each document's best
            // chunk is seen before truncation.
            const int k = cfg.aggregate_chunks ? idx.num_docs : cfg.retrieve_k;
            std::vector<RankedList> run;
            run.reserve(queries.size());
            for (const auto& q : queries)
                run.push_back(finalize(sparse_search(idx, q.text, k, q.id)));
            save_run(run, cfg.run_tag + "-sparse", paths.sparse_run());
            record(paths.sparse_run());
        }
        if (do_dense) {
            require_artifact(paths.dense_index(), "retrieve", "index-dense");
            auto idx = load_dense_index(paths.dense_index());
            auto provider = make_embedding_provider(cfg.embedding_provider);
            if (provider->tag() != idx.provider_tag)
                throw ConfigError("dense index was built with provider '" +
                                  idx.provider_tag + "' but config names '" +
                                  provider->tag() + "'; refusing to mix");
            std::vector<EmbedItem> items;
            items.reserve(queries.size());
            for (const auto& q : queries) items.push_back(EmbedItem{q.id, q.text});
            auto vectors = provider->embed_items(items);
            if (vectors.size() != queries.size())
                throw ProviderError("embedding provider returned " +
                                    std::to_string(vectors.size()) +
                                    " vectors for " + std::to_string(queries.size()) +
                                    " queries");
            const int k = cfg.aggregate_chunks ? static_cast<int>(idx.chunk_ids.size())
                                               : cfg.retrieve_k;
            std::vector<RankedList> run;
            run.reserve(queries.size());
            for (size_t i = 0; i < queries.size(); ++i)
                run.push_back(
                    finalize(dense_search(idx, vectors[i], k, queries[i].id)));
            save_run(run, cfg.run_tag + "-dense", paths.dense_run());
            record(paths.dense_run());
        }
    }

    void run_fuse() {
        require_artifact(paths.dense_run(), "fuse", "retrieve");
        require_artifact(paths.sparse_run(), "fuse", "retrieve");
        auto dense = load_run(paths.dense_run());
        auto sparse = load_run(paths.sparse_run());

        std::map<std::string, std::pair<const RankedList*, const RankedList*>> pairs;
        for (const auto& rl : dense) pairs[rl.query_id].first = &rl;
        for (const auto& rl : sparse) pairs[rl.query_id].second = &rl;

        std::vector<RankedList> fused;
        fused.reserve(pairs.size());
        for (const auto& [qid, pr] : pairs) {
            RankedList empty{qid, {}};
            fused.push_back(fuse(pr.first ? *pr.first : empty,
                                 pr.second ? *pr.second : empty, cfg.fusion));
        }
        save_run(fused, cfg.run_tag + "-hybrid", paths.hybrid_run());
        record(paths.hybrid_run());
    }

    void run_sweep() {
        require_artifact(paths.dense_run(), "sweep", "retrieve");
        require_artifact(paths.sparse_run(), "sweep", "retrieve");
        auto dense = load_run(paths.dense_run());
        auto sparse = load_run(paths.sparse_run());
        auto qrels = load_qrels(cfg.qrels_path);
        auto result = alpha_sweep(dense, sparse, qrels, cfg.sweep_step, cfg.fusion);
        write_text(paths.sweep_json(), sweep_report_json(result).dump(2) + "\n");
        record(paths.sweep_json());
        write_text(paths.sweep_csv(), sweep_report_csv(result));
        record(paths.sweep_csv());
    }

    void run_rerank() {
        require_artifact(paths.hybrid_run(), "rerank", "fuse");
        require_artifact(paths.chunks(), "rerank", "preprocess");
        require_artifact(paths.queries_pp(), "rerank", "preprocess");
        auto fused_run = load_run(paths.hybrid_run());
        auto texts = build_text_lookup(load_chunks(paths.chunks()));
        auto queries = load_queries(paths.queries_pp());
        std::map<std::string, const Query*> query_of;
        for (const auto& q : queries) query_of[q.id] = &q;

        auto reranker = make_reranker(cfg.rerank_provider);
        std::vector<RankedList> reranked;
        reranked.reserve(fused_run.size());
        for (const auto& rl : fused_run) {
            auto it = query_of.find(rl.query_id);
            if (it == query_of.end())
                throw DataError("rerank: run query '" + rl.query_id +
                                "' is missing from " + paths.queries_pp().string());
            reranked.push_back(
                rerank(*reranker, *it->second, rl, cfg.rerank_top_n, texts));
        }
        save_run(reranked, cfg.run_tag + "-reranked", paths.reranked_run());
        record(paths.reranked_run());
    }

    void run_select() {
        require_artifact(paths.reranked_run(), "select", "rerank");
        require_artifact(paths.chunks(), "select", "preprocess");
        require_artifact(paths.queries_pp(), "select", "preprocess");
        auto run = load_run(paths.reranked_run());
        auto texts = build_text_lookup(load_chunks(paths.chunks()));
        auto queries = load_queries(paths.queries_pp());
        std::map<std::string, const Query*> query_of;
        for (const auto& q : queries) query_of[q.id] = &q;

        auto chat = make_chat_provider(cfg.select_provider);
        PromptTemplate tmpl = cfg.select_template.empty()
                                  ? default_selection_template()
                                  : load_prompt_template(cfg.select_template);

        std::ostringstream out;
        for (const auto& rl : run) {
            if (rl.entries.empty()) continue;
            auto it = query_of.find(rl.query_id);
            if (it == query_of.end())
                throw DataError("select: run query '" + rl.query_id +
                                "' is missing from " + paths.queries_pp().string());
            std::vector<std::pair<std::string, std::string>> top10;
            for (size_t i = 0; i < rl.entries.size() && i < 10; ++i) {
                const auto& doc_id = rl.entries[i].doc_id;
                auto tit = texts.find(doc_id);
                if (tit == texts.end())
                    throw DataError("select: no text for candidate '" + doc_id + "'");
                top10.emplace_back(doc_id, tit->second);
            }
            auto decision = select_documents(*chat, *it->second, top10, tmpl);
            json j;
            j["query_id"] = decision.query_id;
            j["kept_indices"] = decision.kept_indices;
            auto& kept_docs = j["kept_doc_ids"] = json::array();
            for (int idx : decision.kept_indices)
                kept_docs.push_back(top10[static_cast<size_t>(idx)].first);
            j["fallback_used"] = decision.fallback_used;
            j["raw_reply"] = decision.raw_reply;
            out << j.dump() << '\n';
        }
        write_text(paths.selections(), out.str());
        record(paths.selections());
    }

    void run_eval() {
        std::filesystem::path run_path;
        std::string which = cfg.eval_run;
        if (which == "auto") {
            if (std::filesystem::exists(paths.reranked_run())) which = "reranked";
            else if (std::filesystem::exists(paths.hybrid_run())) which = "hybrid";
            else if (std::filesystem::exists(paths.dense_run())) which = "dense";
            else which = "sparse";
        }
        std::string producer;
        if (which == "reranked") { run_path = paths.reranked_run(); producer = "rerank"; }
        else if (which == "hybrid") { run_path = paths.hybrid_run(); producer = "fuse"; }
        else if (which == "dense") { run_path = paths.dense_run(); producer = "retrieve"; }
        else { run_path = paths.sparse_run(); producer = "retrieve"; }
        require_artifact(run_path, "eval", producer);

        auto run = load_run(run_path);
        auto qrels = load_qrels(cfg.qrels_path);
        auto report = evaluate_run(run, qrels, cfg.metrics);
        json j = metric_report_json(report);
        j["run_file"] = std::filesystem::relative(run_path, paths.out).string();
        write_text(paths.metrics_json(), j.dump(2) + "\n");
        record(paths.metrics_json());
        write_text(paths.metrics_csv(), metric_report_csv(report));
        record(paths.metrics_csv());
    }
};

} // namespace

RunManifest run_pipeline(const PipelineConfig& cfg, const std::set<Stage>& stages) {
    cfg.validate(stages);
    std::filesystem::create_directories(cfg.output_dir / "runs");
    StagePaths paths{cfg.output_dir};
    LockFile lock(paths.lock());

    PipelineRun run{cfg, paths, {}};
    RunManifest manifest;
    manifest.version = kVersion;
    manifest.created_at = iso8601_utc_now();
    manifest.config_snapshot = cfg.to_json();

    // Fixed pipeline order regardless of set order.
    const std::vector<Stage> order = {Stage::preprocess, Stage::index_sparse,
                                      Stage::index_dense, Stage::retrieve, Stage::fuse,
                                      Stage::sweep,       Stage::rerank,   Stage::select,
                                      Stage::eval};
    for (Stage s : order) {
        if (!stages.count(s)) continue;
        manifest.stages.push_back(to_string(s));
        switch (s) {
            case Stage::preprocess: run.run_preprocess(); break;
            case Stage::index_sparse: run.run_index_sparse(); break;
            case Stage::index_dense: run.run_index_dense(); break;
            case Stage::retrieve: run.run_retrieve(); break;
            case Stage::fuse: run.run_fuse(); break;
            case Stage::sweep: run.run_sweep(); break;
            case Stage::rerank: run.run_rerank(); break;
            case Stage::select: run.run_select(); break;
            case Stage::eval: run.run_eval(); break;
        }
    }

    for (const auto& p :
         {cfg.corpus_path, cfg.queries_path, cfg.qrels_path}) {
        if (!p.empty() && std::filesystem::exists(p))
            manifest.input_hashes[p.string()] = hash_file(p);
    }
    if (cfg.embedding_provider.value("type", "") == "file") {
        std::filesystem::path p = cfg.embedding_provider.value("path", "");
        if (!p.empty() && std::filesystem::exists(p))
            manifest.input_hashes[p.string()] = hash_file(p);
    }
    if (!cfg.select_template.empty() && std::filesystem::exists(cfg.select_template))
        manifest.input_hashes[cfg.select_template.string()] = hash_file(cfg.select_template);

    for (const auto& rel : run.artifacts)
        manifest.artifacts.push_back(
            ManifestArtifact{rel, hash_file(cfg.output_dir / rel)});

    write_text(paths.manifest(), manifest.to_json().dump(2) + "\n");
    return manifest;
}

} // namespace finrag
