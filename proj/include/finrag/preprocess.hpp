#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "finrag/providers.hpp"
#include "finrag/sparse_index.hpp"
#include "finrag/types.hpp"

namespace finrag {

/// A table flattened to header paths: one row-header path per data row, one
/// column-header path per data column (hierarchies joined into a single
/// label), and a row-major cell grid.
struct Table {
    std::vector<std::string> row_headers;
    std::vector<std::string> col_headers;
    std::vector<std::vector<std::string>> cells;
    std::optional<std::string> unit_hint;
};

/// Parses {"row_headers": [...], "col_headers": [...], "cells": [[...]],
/// "unit_hint": ...}. Validates dimensions and non-empty header paths.
Table table_from_json(const nlohmann::json& j);

struct PreprocessConfig {
    int max_tokens = 512;
    int chunk_overlap = 0;
    int keyword_top_k = 8;
    std::set<std::string> stopwords; // empty -> default_stopwords()

    void validate() const; // throws ConfigError
};

const std::set<std::string>& default_stopwords();

/// Splits a document's token stream into chunks of at most max_tokens, with
/// consecutive chunks sharing exactly chunk_overlap tokens. Chunk text is the
/// space-joined token window, so concatenating chunks (dropping each
/// successor's leading overlap) reproduces the tokenized document exactly.
/// Whitespace-only text yields zero chunks and a warning.
std::vector<Chunk> chunk_document(const Document& doc, const PreprocessConfig& cfg,
                                  std::vector<std::string>* warnings = nullptr);

/// Deterministic rule-based markdown cleanup, idempotent by construction:
///  - short title-cased lines followed by a blank line become "##" headings
///  - runs of 2+ lines with matching tab/multi-space column counts become
///    pipe tables with a separator row
///  - bullet markers (•, –, *) normalize to "- "
/// Everything else passes through unchanged.
std::string restructure_markdown(std::string_view text);

/// One annotation line per non-empty cell, row-major:
/// "<row path>, <col path> = <cell>" with " (<unit_hint>)" appended when set.
std::vector<std::string> augment_table(const Table& t);

/// Keeps only contiguous pipe-table blocks (runs of lines that start and end
/// with '|'), joined by blank lines. Empty string when the text has no table.
std::string extract_tables(std::string_view text);

/// Drops stopwords, ranks the remaining unique terms by corpus IDF, keeps the
/// top keyword_top_k, and re-joins their original surface forms in query
/// order. An all-stopword query comes back unchanged with a warning.
std::string extract_keywords(const Query& q, const PreprocessConfig& cfg,
                             const SparseIndex& idf_source,
                             std::vector<std::string>* warnings = nullptr);

/// Cache-first query expansion. The cache is JSONL of
/// {"query_id": ..., "expanded_text": ...}; misses call the provider and
/// append. The original query text is guaranteed to be a prefix of the
/// result (provider output that rewrites instead of appending is prefixed
/// with the query). Provider failure with no cache entry raises ProviderError
/// naming the query id.
std::string expand_query(const Query& q, const TextTransformProvider& provider,
                         const std::filesystem::path& cache_path);

} // namespace finrag
