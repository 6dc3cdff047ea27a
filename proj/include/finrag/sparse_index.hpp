#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "finrag/types.hpp"

namespace finrag {

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

struct Posting {
    int chunk_ordinal = 0;
    int term_frequency = 0;
};

/// Inverted index with BM25 statistics. Immutable once built; safe to share
/// across concurrent searches.
struct SparseIndex {
    std::map<std::string, std::vector<Posting>> postings; // sorted by ordinal
    std::vector<int> doc_lengths;                         // tokens per chunk
    double avg_doc_length = 0.0;
    int num_docs = 0;
    std::vector<std::string> chunk_ids;
    Bm25Params params;

    /// Lucene-style IDF: ln(1 + (N - df + 0.5) / (df + 0.5)). Always > 0,
    /// which keeps BM25 scores non-negative. Unseen terms get df = 0.
    double idf(const std::string& term) const;
};

/// Builds the index over tokenized chunk texts. Throws DataError on an empty
/// chunk list. Deterministic for a given input order.
SparseIndex build_sparse_index(const std::vector<Chunk>& chunks,
                               double k1 = 1.2, double b = 0.75);

/// BM25 score of one chunk for the given term sequence. Terms absent from the
/// index contribute 0. Throws DataError on an out-of-range ordinal.
double bm25_score(const SparseIndex& idx,
                  const std::vector<std::string>& query_terms,
                  int chunk_ordinal);

/// Top-k chunks by BM25 over tokenize(query_text), score descending, ties by
/// ascending chunk id. Zero-score chunks are excluded, so the result may be
/// shorter than k (or empty).
RankedList sparse_search(const SparseIndex& idx, std::string_view query_text,
                         int k, std::string query_id = {});

/// Version-tagged JSON persistence; round-trips exactly.
void save_sparse_index(const SparseIndex& idx, const std::filesystem::path& path);
SparseIndex load_sparse_index(const std::filesystem::path& path);

} // namespace finrag
