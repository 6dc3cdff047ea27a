#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "finrag/types.hpp"

namespace finrag {

/// Reads a BEIR-style corpus: one JSON object per line with `_id`, `title`,
/// `text`. Preserves file order. Throws DataError on malformed lines
/// (naming the line number) and duplicate ids (naming the id).
std::vector<Document> load_corpus(const std::filesystem::path& path);

/// Reads queries: JSONL with `_id`, `text`. Same error contract as load_corpus.
std::vector<Query> load_queries(const std::filesystem::path& path);

/// Reads TSV qrels with header `query-id<TAB>corpus-id<TAB>score`. Repeated
/// (query, doc) pairs keep the last occurrence; each repeat appends a warning
/// (to `warnings` when given, otherwise stderr).
Qrels load_qrels(const std::filesystem::path& path,
                 std::vector<std::string>* warnings = nullptr);

/// Writes TREC run format: `query_id Q0 doc_id rank score tag`, one line per
/// entry, scores with 6 decimal places. Lists are validated first.
void save_run(const std::vector<RankedList>& runs, const std::string& tag,
              const std::filesystem::path& path);

/// Parses a TREC run file back into ranked lists (inverse of save_run up to
/// the 6-decimal score quantization). Lines are grouped by query in
/// encounter order; each list is validated.
std::vector<RankedList> load_run(const std::filesystem::path& path);

} // namespace finrag
