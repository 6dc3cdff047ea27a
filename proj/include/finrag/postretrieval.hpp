#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "finrag/providers.hpp"
#include "finrag/types.hpp"

namespace finrag {

/// Outcome of the selection agent for one query. kept_indices is always
/// sorted, duplicate-free, and within [0, n-1] for n candidates shown.
struct SelectionDecision {
    std::string query_id;
    std::vector<int> kept_indices;
    std::string raw_reply;
    bool fallback_used = false;
};

/// Rescores the top-min(top_n, n) fused candidates with the reranker and
/// re-sorts descending (ties by ascending doc id); everything past top_n is
/// dropped. chunk_texts must resolve every candidate id or DataError names
/// the missing one.
RankedList rerank(const Reranker& reranker, const Query& query,
                  const RankedList& fused, int top_n,
                  const std::unordered_map<std::string, std::string>& chunk_texts);

/// Extracts the selection from a model reply: the first bracketed integer
/// list (e.g. "[0, 2, 8, 9]"; "[ ]" is an empty selection). Indices are
/// deduplicated, sorted, and filtered to [0, num_candidates-1]. A reply with
/// no parseable bracketed list keeps every index and sets the fallback flag.
/// Never throws.
std::pair<std::vector<int>, bool> parse_selection_reply(std::string_view reply,
                                                        int num_candidates);

/// Selection prompt split into the chat provider's two fields. The user part
/// contains {query} plus one line with {i}/{corpus_i}, which expands to one
/// line per candidate.
struct PromptTemplate {
    std::string system;
    std::string user;
};

/// The built-in template (identical to templates/selection_prompt.txt).
const PromptTemplate& default_selection_template();

/// Parses a template file: lines after "[system]" form the system part, lines
/// after "[user]" the user part. "#"-prefixed lines before the first section
/// are header comments.
PromptTemplate load_prompt_template(const std::filesystem::path& path);

struct AssembledPrompt {
    std::string system;
    std::string user;
};

/// Byte-stable prompt assembly: substitutes {query} and expands the corpus
/// line for each (doc_id, text) pair in order.
AssembledPrompt build_selection_prompt(
    const PromptTemplate& tmpl, const std::string& query_text,
    std::span<const std::pair<std::string, std::string>> top_docs);

/// Runs the selection agent on at most 10 (doc_id, text) candidates.
/// Transport failures propagate as ProviderError; unparseable replies fall
/// back to keeping everything (flagged on the decision).
SelectionDecision select_documents(
    const ChatProvider& selector, const Query& query,
    const std::vector<std::pair<std::string, std::string>>& top10,
    const PromptTemplate& tmpl = default_selection_template());

} // namespace finrag
