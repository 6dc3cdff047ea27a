#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace finrag {

using EmbeddingVector = std::vector<double>;

/// Unit of embedding work. Text-based providers embed `text`; the file-backed
/// provider resolves `id` against its stored table. The free function embed()
/// sets id = text, so lookup providers can be driven with bare id strings.
struct EmbedItem {
    std::string id;
    std::string text;
};

/// Batched, order-preserving, fixed-dimension embedding source. Implementations
/// must be deterministic: the same input always yields the same vector.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::vector<EmbeddingVector> embed_items(std::span<const EmbedItem> items) const = 0;
    virtual std::string tag() const = 0;
};

/// Checked batch embedding: output length equals input length, all vectors
/// share one dimension and contain only finite values. Violations raise
/// ProviderError naming the first offending item.
std::vector<EmbeddingVector> embed(const EmbeddingProvider& provider,
                                   const std::vector<std::string>& texts);

/// Vectors preloaded from JSONL lines {"id": ..., "vector": [...]}. Lookup is
/// by item id; unknown ids raise ProviderError.
class FileBackedEmbeddingProvider : public EmbeddingProvider {
public:
    explicit FileBackedEmbeddingProvider(const std::filesystem::path& path);
    std::vector<EmbeddingVector> embed_items(std::span<const EmbedItem> items) const override;
    std::string tag() const override { return tag_; }

private:
    std::string tag_;
    std::map<std::string, EmbeddingVector> table_;
};

/// Deterministic test stub: token-hash bag of words projected onto `dim`
/// buckets, then unit-normalized. Carries no semantics; lexical overlap is all
/// it can see.
class HashingEmbeddingProvider : public EmbeddingProvider {
public:
    explicit HashingEmbeddingProvider(int dim);
    std::vector<EmbeddingVector> embed_items(std::span<const EmbedItem> items) const override;
    std::string tag() const override;

private:
    int dim_;
};

/// POSTs {"texts": [...]} and expects {"vectors": [[...], ...]} of equal
/// length and order. Non-200 responses raise ProviderError.
class HttpEmbeddingProvider : public EmbeddingProvider {
public:
    explicit HttpEmbeddingProvider(std::string url);
    std::vector<EmbeddingVector> embed_items(std::span<const EmbedItem> items) const override;
    std::string tag() const override { return "http:" + url_; }

private:
    std::string url_;
};

/// Text-in/text-out hook (query expansion, LLM rewriting). Same length and
/// order contract as embedding.
class TextTransformProvider {
public:
    virtual ~TextTransformProvider() = default;
    virtual std::vector<std::string> transform(const std::vector<std::string>& texts) const = 0;
};

class IdentityTransformProvider : public TextTransformProvider {
public:
    std::vector<std::string> transform(const std::vector<std::string>& texts) const override {
        return texts;
    }
};

/// Appends a fixed suffix to every input; a deterministic stand-in for an
/// expansion model in tests.
class SuffixTransformProvider : public TextTransformProvider {
public:
    explicit SuffixTransformProvider(std::string suffix) : suffix_(std::move(suffix)) {}
    std::vector<std::string> transform(const std::vector<std::string>& texts) const override;

private:
    std::string suffix_;
};

/// POSTs {"texts": [...]} and expects {"outputs": [...]}.
class HttpTransformProvider : public TextTransformProvider {
public:
    explicit HttpTransformProvider(std::string url) : url_(std::move(url)) {}
    std::vector<std::string> transform(const std::vector<std::string>& texts) const override;

private:
    std::string url_;
};

struct RerankCandidate {
    std::string doc_id;
    std::string text;
    double prior_score = 0.0; // fused score the candidate arrived with
};

/// Rescores candidates for one query. Same length/order contract; must be
/// deterministic for identical inputs.
class Reranker {
public:
    virtual ~Reranker() = default;
    virtual std::vector<double> rescore(const std::string& query_text,
                                        std::span<const RerankCandidate> candidates) const = 0;
};

/// Returns each candidate's prior score, so reranking reduces to truncation.
class IdentityReranker : public Reranker {
public:
    std::vector<double> rescore(const std::string& query_text,
                                std::span<const RerankCandidate> candidates) const override;
};

/// Scores |query tokens ∩ doc tokens| / |query tokens| (unique lowercased
/// tokens). Equal overlaps are separated by a 1e-6-scaled prior so the fused
/// order breaks ties.
class LexicalOverlapReranker : public Reranker {
public:
    std::vector<double> rescore(const std::string& query_text,
                                std::span<const RerankCandidate> candidates) const override;
};

/// POSTs {"query": ..., "documents": [...]} and expects {"scores": [...]}.
class HttpReranker : public Reranker {
public:
    explicit HttpReranker(std::string url) : url_(std::move(url)) {}
    std::vector<double> rescore(const std::string& query_text,
                                std::span<const RerankCandidate> candidates) const override;

private:
    std::string url_;
};

/// One-shot chat completion used by the selection agent.
class ChatProvider {
public:
    virtual ~ChatProvider() = default;
    virtual std::string complete(const std::string& system_prompt,
                                 const std::string& user_prompt) const = 0;
};

/// Always replies with a fixed string (default keeps indices 0..9).
class StubChatProvider : public ChatProvider {
public:
    explicit StubChatProvider(std::string reply = "[0, 1, 2, 3, 4, 5, 6, 7, 8, 9]")
        : reply_(std::move(reply)) {}
    std::string complete(const std::string&, const std::string&) const override {
        return reply_;
    }

private:
    std::string reply_;
};

/// POSTs {"system": ..., "user": ...} and expects {"text": ...}.
class HttpChatProvider : public ChatProvider {
public:
    explicit HttpChatProvider(std::string url) : url_(std::move(url)) {}
    std::string complete(const std::string& system_prompt,
                         const std::string& user_prompt) const override;

private:
    std::string url_;
};

// Factories over the config schema {"type": "...", ...}. Unknown types raise
// ConfigError.
std::unique_ptr<EmbeddingProvider> make_embedding_provider(const nlohmann::json& cfg);
std::unique_ptr<TextTransformProvider> make_transform_provider(const nlohmann::json& cfg);
std::unique_ptr<Reranker> make_reranker(const nlohmann::json& cfg);
std::unique_ptr<ChatProvider> make_chat_provider(const nlohmann::json& cfg);

} // namespace finrag
