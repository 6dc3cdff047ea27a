#include "finrag/providers.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>

#include <httplib.h>

#include "finrag/errors.hpp"
#include "finrag/tokenize.hpp"

namespace finrag {

namespace {

using nlohmann::json;

// Splits "http://host:port/some/path" into origin + path for httplib.
std::pair<std::string, std::string> split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw ConfigError("provider url must include a scheme: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

json post_json(const std::string& url, const json& body, const char* what) {
    auto [origin, path] = split_url(url);
    httplib::Client client(origin);
    client.set_connection_timeout(10);
    client.set_read_timeout(120);
    auto res = client.Post(path, body.dump(), "application/json");
    if (!res)
        throw ProviderError(std::string(what) + " provider unreachable at " + url +
                            " (" + httplib::to_string(res.error()) + ")");
    if (res->status != 200)
        throw ProviderError(std::string(what) + " provider returned HTTP " +
                            std::to_string(res->status) + " from " + url);
    json reply = json::parse(res->body, nullptr, false);
    if (reply.is_discarded())
        throw ProviderError(std::string(what) + " provider returned invalid JSON from " +
                            url);
    return reply;
}

uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

} // namespace

std::vector<EmbeddingVector> embed(const EmbeddingProvider& provider,
                                   const std::vector<std::string>& texts) {
    if (texts.empty()) throw DataError("embed: empty input batch");
    std::vector<EmbedItem> items;
    items.reserve(texts.size());
    for (const auto& t : texts) items.push_back(EmbedItem{t, t});

    auto vectors = provider.embed_items(items);
    if (vectors.size() != texts.size())
        throw ProviderError("embedding provider returned " +
                            std::to_string(vectors.size()) + " vectors for " +
                            std::to_string(texts.size()) + " inputs (first input: '" +
                            texts.front() + "')");
    for (size_t i = 0; i < vectors.size(); ++i) {
        if (vectors[i].size() != vectors[0].size())
            throw ProviderError("embedding dimension mismatch within batch at '" +
                                texts[i] + "'");
        for (double x : vectors[i])
            if (!std::isfinite(x))
                throw ProviderError("non-finite embedding value for '" + texts[i] + "'");
    }
    return vectors;
}

FileBackedEmbeddingProvider::FileBackedEmbeddingProvider(const std::filesystem::path& path)
    : tag_("file:" + path.string()) {
    std::ifstream in(path);
    if (!in) throw ProviderError("cannot open embedding file: " + path.string());
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("id") ||
            !j.contains("vector"))
            throw ProviderError(path.string() + ":" + std::to_string(line_no) +
                                ": expected {\"id\": ..., \"vector\": [...]}");
        table_[j.at("id").get<std::string>()] =
            j.at("vector").get<EmbeddingVector>();
    }
    if (table_.empty())
        throw ProviderError("embedding file has no entries: " + path.string());
}

std::vector<EmbeddingVector> FileBackedEmbeddingProvider::embed_items(
    std::span<const EmbedItem> items) const {
    std::vector<EmbeddingVector> out;
    out.reserve(items.size());
    for (const auto& item : items) {
        auto it = table_.find(item.id);
        if (it == table_.end())
            throw ProviderError("no stored embedding for id '" + item.id + "' (" +
                                tag_ + ")");
        out.push_back(it->second);
    }
    return out;
}

HashingEmbeddingProvider::HashingEmbeddingProvider(int dim) : dim_(dim) {
    if (dim < 1) throw ConfigError("hashing embedding dimension must be >= 1");
}

std::string HashingEmbeddingProvider::tag() const {
    return "hashing:d" + std::to_string(dim_);
}

std::vector<EmbeddingVector> HashingEmbeddingProvider::embed_items(
    std::span<const EmbedItem> items) const {
    std::vector<EmbeddingVector> out;
    out.reserve(items.size());
    for (const auto& item : items) {
        EmbeddingVector v(static_cast<size_t>(dim_), 0.0);
        for (const auto& token : tokenize(item.text))
            v[fnv1a64(token) % static_cast<uint64_t>(dim_)] += 1.0;
        double n = 0.0;
        for (double x : v) n += x * x;
        n = std::sqrt(n);
        if (n > 0.0)
            for (double& x : v) x /= n;
        out.push_back(std::move(v));
    }
    return out;
}

HttpEmbeddingProvider::HttpEmbeddingProvider(std::string url) : url_(std::move(url)) {}

std::vector<EmbeddingVector> HttpEmbeddingProvider::embed_items(
    std::span<const EmbedItem> items) const {
    json body;
    auto& texts = body["texts"] = json::array();
    for (const auto& item : items) texts.push_back(item.text);
    json reply = post_json(url_, body, "embedding");
    if (!reply.contains("vectors") || !reply.at("vectors").is_array())
        throw ProviderError("embedding provider reply lacks 'vectors': " + url_);
    auto vectors = reply.at("vectors").get<std::vector<EmbeddingVector>>();
    if (vectors.size() != items.size()) {
        std::string first = items.empty() ? std::string() : items.front().id;
        throw ProviderError("embedding provider returned " +
                            std::to_string(vectors.size()) + " vectors for " +
                            std::to_string(items.size()) + " inputs (first input: '" +
                            first + "')");
    }
    return vectors;
}

std::vector<std::string> SuffixTransformProvider::transform(
    const std::vector<std::string>& texts) const {
    std::vector<std::string> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(t + suffix_);
    return out;
}

std::vector<std::string> HttpTransformProvider::transform(
    const std::vector<std::string>& texts) const {
    json body;
    body["texts"] = texts;
    json reply = post_json(url_, body, "text-transform");
    if (!reply.contains("outputs") || !reply.at("outputs").is_array())
        throw ProviderError("text-transform provider reply lacks 'outputs': " + url_);
    auto outputs = reply.at("outputs").get<std::vector<std::string>>();
    if (outputs.size() != texts.size())
        throw ProviderError("text-transform provider returned " +
                            std::to_string(outputs.size()) + " outputs for " +
                            std::to_string(texts.size()) + " inputs");
    return outputs;
}

std::vector<double> IdentityReranker::rescore(
    const std::string&, std::span<const RerankCandidate> candidates) const {
    std::vector<double> out;
    out.reserve(candidates.size());
    for (const auto& c : candidates) out.push_back(c.prior_score);
    return out;
}

std::vector<double> LexicalOverlapReranker::rescore(
    const std::string& query_text, std::span<const RerankCandidate> candidates) const {
    auto query_tokens = tokenize(query_text);
    std::set<std::string> query_set(query_tokens.begin(), query_tokens.end());

    std::vector<double> out;
    out.reserve(candidates.size());
    for (const auto& c : candidates) {
        std::set<std::string> doc_set;
        for (auto& t : tokenize(c.text)) doc_set.insert(std::move(t));
        size_t hits = 0;
        for (const auto& t : query_set)
            if (doc_set.count(t)) ++hits;
        double overlap = query_set.empty()
                             ? 0.0
                             : static_cast<double>(hits) / query_set.size();
        // Overlap granularity is 1/|query tokens|; the scaled prior only
        // separates exact overlap ties.
        out.push_back(overlap + 1e-6 * c.prior_score);
    }
    return out;
}

std::vector<double> HttpReranker::rescore(
    const std::string& query_text, std::span<const RerankCandidate> candidates) const {
    json body;
    body["query"] = query_text;
    auto& docs = body["documents"] = json::array();
    for (const auto& c : candidates) docs.push_back(c.text);
    json reply = post_json(url_, body, "reranker");
    if (!reply.contains("scores") || !reply.at("scores").is_array())
        throw ProviderError("reranker reply lacks 'scores': " + url_);
    auto scores = reply.at("scores").get<std::vector<double>>();
    if (scores.size() != candidates.size())
        throw ProviderError("reranker returned " + std::to_string(scores.size()) +
                            " scores for " + std::to_string(candidates.size()) +
                            " candidates");
    return scores;
}

std::string HttpChatProvider::complete(const std::string& system_prompt,
                                       const std::string& user_prompt) const {
    json body;
    body["system"] = system_prompt;
    body["user"] = user_prompt;
    json reply = post_json(url_, body, "chat");
    if (!reply.contains("text") || !reply.at("text").is_string())
        throw ProviderError("chat provider reply lacks 'text': " + url_);
    return reply.at("text").get<std::string>();
}

namespace {

std::string require_type(const json& cfg, const char* what) {
    if (!cfg.is_object() || !cfg.contains("type") || !cfg.at("type").is_string())
        throw ConfigError(std::string(what) + " provider config needs a 'type' field");
    return cfg.at("type").get<std::string>();
}

std::string require_url(const json& cfg, const char* what) {
    if (!cfg.contains("url") || !cfg.at("url").is_string())
        throw ConfigError(std::string(what) + " http provider config needs 'url'");
    return cfg.at("url").get<std::string>();
}

} // namespace

std::unique_ptr<EmbeddingProvider> make_embedding_provider(const json& cfg) {
    auto type = require_type(cfg, "embedding");
    if (type == "file") {
        if (!cfg.contains("path"))
            throw ConfigError("file embedding provider config needs 'path'");
        return std::make_unique<FileBackedEmbeddingProvider>(
            cfg.at("path").get<std::string>());
    }
    if (type == "hashing")
        return std::make_unique<HashingEmbeddingProvider>(cfg.value("dim", 64));
    if (type == "http")
        return std::make_unique<HttpEmbeddingProvider>(require_url(cfg, "embedding"));
    throw ConfigError("unknown embedding provider type '" + type + "'");
}

std::unique_ptr<TextTransformProvider> make_transform_provider(const json& cfg) {
    auto type = require_type(cfg, "text-transform");
    if (type == "identity") return std::make_unique<IdentityTransformProvider>();
    if (type == "suffix")
        return std::make_unique<SuffixTransformProvider>(cfg.value("suffix", ""));
    if (type == "http")
        return std::make_unique<HttpTransformProvider>(require_url(cfg, "text-transform"));
    throw ConfigError("unknown text-transform provider type '" + type + "'");
}

std::unique_ptr<Reranker> make_reranker(const json& cfg) {
    auto type = require_type(cfg, "reranker");
    if (type == "identity") return std::make_unique<IdentityReranker>();
    if (type == "lexical") return std::make_unique<LexicalOverlapReranker>();
    if (type == "http")
        return std::make_unique<HttpReranker>(require_url(cfg, "reranker"));
    throw ConfigError("unknown reranker type '" + type + "'");
}

std::unique_ptr<ChatProvider> make_chat_provider(const json& cfg) {
    auto type = require_type(cfg, "chat");
    if (type == "stub") {
        if (cfg.contains("reply"))
            return std::make_unique<StubChatProvider>(cfg.at("reply").get<std::string>());
        return std::make_unique<StubChatProvider>();
    }
    if (type == "http")
        return std::make_unique<HttpChatProvider>(require_url(cfg, "chat"));
    throw ConfigError("unknown chat provider type '" + type + "'");
}

} // namespace finrag
