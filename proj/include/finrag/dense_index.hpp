#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "finrag/providers.hpp"
#include "finrag/types.hpp"

namespace finrag {

/// Exhaustive-scan vector store. Vectors are unit-normalized at build time so
/// cosine reduces to a dot product. Immutable once built.
struct DenseIndex {
    std::vector<std::string> chunk_ids;
    std::vector<EmbeddingVector> vectors;
    int dimension = 0;
    std::string provider_tag;
};

double dot(std::span<const double> u, std::span<const double> v);
double norm(std::span<const double> u);

/// Cosine similarity in [-1, 1]. Throws DataError on dimension mismatch or a
/// zero vector.
double cosine(const EmbeddingVector& u, const EmbeddingVector& v);

/// Embeds every chunk (id + text pairs go to the provider) and stores unit
/// vectors. A zero vector from the provider raises DataError naming the chunk.
DenseIndex build_dense_index(const std::vector<Chunk>& chunks,
                             const EmbeddingProvider& provider);

/// Top-k by cosine, descending, ties by ascending chunk id. Exact scan over
/// all stored vectors; k past the corpus size returns everything.
RankedList dense_search(const DenseIndex& idx, const EmbeddingVector& query_vector,
                        int k, std::string query_id = {});

/// Version-tagged JSON persistence; round-trips exactly. Unit norms are
/// re-checked (1e-6) at load.
void save_dense_index(const DenseIndex& idx, const std::filesystem::path& path);
DenseIndex load_dense_index(const std::filesystem::path& path);

} // namespace finrag
