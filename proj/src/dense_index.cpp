#include "finrag/dense_index.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "finrag/errors.hpp"

namespace finrag {

namespace {

constexpr const char* kIndexVersion = "finrag-dense-v1";
constexpr double kNormTolerance = 1e-6;

EmbeddingVector normalized(const EmbeddingVector& v, const std::string& what) {
    double n = norm(v);
    if (n == 0.0) throw DataError("zero-norm embedding for " + what);
    EmbeddingVector out(v.size());
    for (size_t i = 0; i < v.size(); ++i) out[i] = v[i] / n;
    return out;
}

} // namespace

double dot(std::span<const double> u, std::span<const double> v) {
    double s = 0.0;
    for (size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
    return s;
}

double norm(std::span<const double> u) {
    return std::sqrt(dot(u, u));
}

double cosine(const EmbeddingVector& u, const EmbeddingVector& v) {
    if (u.size() != v.size())
        throw DataError("cosine: dimension mismatch (" + std::to_string(u.size()) +
                        " vs " + std::to_string(v.size()) + ")");
    double nu = norm(u), nv = norm(v);
    if (nu == 0.0 || nv == 0.0) throw DataError("cosine: zero vector");
    return dot(u, v) / (nu * nv);
}

DenseIndex build_dense_index(const std::vector<Chunk>& chunks,
                             const EmbeddingProvider& provider) {
    if (chunks.empty()) throw DataError("cannot build a dense index over zero chunks");

    std::vector<EmbedItem> items;
    items.reserve(chunks.size());
    for (const auto& c : chunks) items.push_back(EmbedItem{c.id, c.text});

    auto raw = provider.embed_items(items);
    if (raw.size() != items.size())
        throw ProviderError("embedding provider returned " + std::to_string(raw.size()) +
                            " vectors for " + std::to_string(items.size()) +
                            " inputs (first input: '" + items.front().id + "')");

    DenseIndex idx;
    idx.provider_tag = provider.tag();
    idx.chunk_ids.reserve(chunks.size());
    idx.vectors.reserve(chunks.size());
    for (size_t i = 0; i < raw.size(); ++i) {
        if (i == 0) idx.dimension = static_cast<int>(raw[i].size());
        if (static_cast<int>(raw[i].size()) != idx.dimension)
            throw ProviderError("embedding dimension mismatch for chunk '" +
                                chunks[i].id + "'");
        for (double x : raw[i])
            if (!std::isfinite(x))
                throw ProviderError("non-finite embedding value for chunk '" +
                                    chunks[i].id + "'");
        idx.chunk_ids.push_back(chunks[i].id);
        idx.vectors.push_back(normalized(raw[i], "chunk '" + chunks[i].id + "'"));
    }
    if (idx.dimension == 0) throw DataError("dense index: zero-dimensional vectors");
    return idx;
}

RankedList dense_search(const DenseIndex& idx, const EmbeddingVector& query_vector,
                        int k, std::string query_id) {
    if (k < 1) throw DataError("dense_search: k must be >= 1");
    if (static_cast<int>(query_vector.size()) != idx.dimension)
        throw DataError("dense_search: query dimension " +
                        std::to_string(query_vector.size()) + " != index dimension " +
                        std::to_string(idx.dimension));

    auto q = normalized(query_vector, "query vector");
    std::vector<std::pair<size_t, double>> scored(idx.vectors.size());
    for (size_t i = 0; i < idx.vectors.size(); ++i)
        scored[i] = {i, dot(q, idx.vectors[i])};

    std::sort(scored.begin(), scored.end(), [&](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return idx.chunk_ids[a.first] < idx.chunk_ids[b.first];
    });

    RankedList out;
    out.query_id = std::move(query_id);
    size_t take = std::min<size_t>(static_cast<size_t>(k), scored.size());
    out.entries.reserve(take);
    for (size_t i = 0; i < take; ++i)
        out.entries.push_back(RunEntry{idx.chunk_ids[scored[i].first], scored[i].second,
                                       static_cast<int>(i) + 1});
    return out;
}

void save_dense_index(const DenseIndex& idx, const std::filesystem::path& path) {
    nlohmann::json j;
    j["version"] = kIndexVersion;
    j["dimension"] = idx.dimension;
    j["provider_tag"] = idx.provider_tag;
    j["chunk_ids"] = idx.chunk_ids;
    j["vectors"] = idx.vectors;
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write dense index: " + path.string());
    out << j.dump() << '\n';
}

DenseIndex load_dense_index(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dense index: " + path.string());
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded())
        throw DataError("dense index is not valid JSON: " + path.string());
    if (j.value("version", "") != kIndexVersion)
        throw DataError("unsupported dense index version in " + path.string());

    DenseIndex idx;
    idx.dimension = j.at("dimension").get<int>();
    idx.provider_tag = j.at("provider_tag").get<std::string>();
    idx.chunk_ids = j.at("chunk_ids").get<std::vector<std::string>>();
    idx.vectors = j.at("vectors").get<std::vector<EmbeddingVector>>();
    if (idx.vectors.size() != idx.chunk_ids.size())
        throw DataError("dense index is inconsistent: " + path.string());
    for (size_t i = 0; i < idx.vectors.size(); ++i) {
        if (static_cast<int>(idx.vectors[i].size()) != idx.dimension)
            throw DataError("dense index vector dimension mismatch for '" +
                            idx.chunk_ids[i] + "'");
        if (std::abs(norm(idx.vectors[i]) - 1.0) > kNormTolerance)
            throw DataError("dense index vector for '" + idx.chunk_ids[i] +
                            "' is not unit-norm");
    }
    return idx;
}

} // namespace finrag
