#include "finrag/postretrieval.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "finrag/errors.hpp"

namespace finrag {

RankedList rerank(const Reranker& reranker, const Query& query, const RankedList& fused,
                  int top_n, const std::unordered_map<std::string, std::string>& chunk_texts) {
    if (top_n < 1) throw DataError("rerank: top_n must be >= 1");
    if (fused.entries.empty())
        throw DataError("rerank: empty candidate list for query '" + query.id + "'");

    const size_t take = std::min<size_t>(fused.entries.size(),
                                         static_cast<size_t>(top_n));
    std::vector<RerankCandidate> candidates;
    candidates.reserve(take);
    for (size_t i = 0; i < take; ++i) {
        const auto& e = fused.entries[i];
        auto it = chunk_texts.find(e.doc_id);
        if (it == chunk_texts.end())
            throw DataError("rerank: no text for candidate '" + e.doc_id + "'");
        candidates.push_back(RerankCandidate{e.doc_id, it->second, e.score});
    }

    auto scores = reranker.rescore(query.text, candidates);
    if (scores.size() != candidates.size())
        throw ProviderError("reranker returned " + std::to_string(scores.size()) +
                            " scores for " + std::to_string(candidates.size()) +
                            " candidates (query '" + query.id + "')");

    std::vector<size_t> order(candidates.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return candidates[a].doc_id < candidates[b].doc_id;
    });

    RankedList out;
    out.query_id = fused.query_id;
    out.entries.reserve(order.size());
    for (size_t i = 0; i < order.size(); ++i)
        out.entries.push_back(RunEntry{candidates[order[i]].doc_id, scores[order[i]],
                                       static_cast<int>(i) + 1});
    return out;
}

namespace {

// Parses a bracket-free candidate like " 0, 2, 8, 9 " into integers. Returns
// false when any token is not a plain (optionally signed) integer.
bool parse_int_list(std::string_view inner, std::vector<int>& out) {
    out.clear();
    size_t pos = 0;
    bool any_token = false;
    while (pos <= inner.size()) {
        size_t comma = inner.find(',', pos);
        std::string_view token = inner.substr(
            pos, comma == std::string_view::npos ? inner.size() - pos : comma - pos);
        // trim
        while (!token.empty() && (token.front() == ' ' || token.front() == '\t' ||
                                  token.front() == '\n' || token.front() == '\r'))
            token.remove_prefix(1);
        while (!token.empty() && (token.back() == ' ' || token.back() == '\t' ||
                                  token.back() == '\n' || token.back() == '\r'))
            token.remove_suffix(1);

        if (token.empty()) {
            if (any_token || comma != std::string_view::npos) return false;
        } else {
            size_t digits_start = token.front() == '-' ? 1 : 0;
            if (digits_start == token.size() || token.size() - digits_start > 9)
                return false;
            long value = 0;
            for (size_t i = digits_start; i < token.size(); ++i) {
                if (token[i] < '0' || token[i] > '9') return false;
                value = value * 10 + (token[i] - '0');
            }
            out.push_back(static_cast<int>(digits_start ? -value : value));
            any_token = true;
        }
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return true;
}

} // namespace

std::pair<std::vector<int>, bool> parse_selection_reply(std::string_view reply,
                                                        int num_candidates) {
    const int n = std::max(num_candidates, 0);
    for (size_t open = reply.find('['); open != std::string_view::npos;
         open = reply.find('[', open + 1)) {
        size_t close = reply.find(']', open + 1);
        if (close == std::string_view::npos) break;
        std::vector<int> parsed;
        if (!parse_int_list(reply.substr(open + 1, close - open - 1), parsed)) continue;

        std::vector<int> kept;
        for (int v : parsed)
            if (v >= 0 && v < n) kept.push_back(v);
        std::sort(kept.begin(), kept.end());
        kept.erase(std::unique(kept.begin(), kept.end()), kept.end());
        return {std::move(kept), false};
    }

    // No parseable bracketed list anywhere: fail open, keep everything.
    std::vector<int> all(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) all[static_cast<size_t>(i)] = i;
    return {std::move(all), true};
}

namespace {

constexpr std::string_view kDefaultSystem =
    "You are an expert financial advisor and evaluator focused on improving responses.\n"
    "Your task is to enhance answers based on detailed evaluation scores while:\n"
    "- Maintaining factual accuracy with the provided documents\n"
    "- Ensuring responses are clear and well-structured for financial contexts\n"
    "- Providing comprehensive answers that address all aspects of the query\n"
    "- Using professional financial terminology appropriately";

constexpr std::string_view kDefaultUser =
    "You are given the pair of Query, Corpus (same query)\n"
    "Out of the 10 documents, only provide the list of indices of those that are "
    "RELEVANT (e.g. the content is somehow needed to answer the question), from 0 to 9.\n"
    "Example : [0, 2, 8, 9]\n"
    "\n"
    "Query : {query}\n"
    "Corpus #{i} : {corpus_i}";

void replace_all(std::string& s, std::string_view needle, std::string_view value) {
    size_t pos = 0;
    while ((pos = s.find(needle, pos)) != std::string::npos) {
        s.replace(pos, needle.size(), value);
        pos += value.size();
    }
}

} // namespace

const PromptTemplate& default_selection_template() {
    static const PromptTemplate tmpl{std::string(kDefaultSystem),
                                     std::string(kDefaultUser)};
    return tmpl;
}

PromptTemplate load_prompt_template(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open prompt template: " + path.string());

    PromptTemplate tmpl;
    std::string* section = nullptr;
    bool first_line_of_section = true;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line == "[system]") {
            section = &tmpl.system;
            first_line_of_section = true;
            continue;
        }
        if (line == "[user]") {
            section = &tmpl.user;
            first_line_of_section = true;
            continue;
        }
        if (!section) {
            if (!line.empty() && line.front() != '#')
                throw DataError(path.string() +
                                ": content before [system]/[user] section");
            continue;
        }
        if (!first_line_of_section) section->push_back('\n');
        *section += line;
        first_line_of_section = false;
    }
    if (tmpl.user.find("{corpus_i}") == std::string::npos)
        throw DataError(path.string() + ": template lacks a {corpus_i} line");
    if (tmpl.user.find("{query}") == std::string::npos)
        throw DataError(path.string() + ": template lacks {query}");
    return tmpl;
}

AssembledPrompt build_selection_prompt(
    const PromptTemplate& tmpl, const std::string& query_text,
    std::span<const std::pair<std::string, std::string>> top_docs) {
    AssembledPrompt prompt;
    prompt.system = tmpl.system;

    std::istringstream lines(tmpl.user);
    std::string line;
    bool first = true;
    while (std::getline(lines, line)) {
        std::string expanded;
        if (line.find("{corpus_i}") != std::string::npos) {
            for (size_t i = 0; i < top_docs.size(); ++i) {
                std::string row = line;
                replace_all(row, "{i}", std::to_string(i));
                replace_all(row, "{corpus_i}", top_docs[i].second);
                if (i > 0) expanded.push_back('\n');
                expanded += row;
            }
        } else {
            expanded = line;
            replace_all(expanded, "{query}", query_text);
        }
        if (!first) prompt.user.push_back('\n');
        prompt.user += expanded;
        first = false;
    }
    return prompt;
}

SelectionDecision select_documents(
    const ChatProvider& selector, const Query& query,
    const std::vector<std::pair<std::string, std::string>>& top10,
    const PromptTemplate& tmpl) {
    if (top10.empty() || top10.size() > 10)
        throw DataError("select_documents: expected 1..10 candidates, got " +
                        std::to_string(top10.size()));

    auto prompt = build_selection_prompt(tmpl, query.text, top10);
    // Transport failures propagate; there is no silent fallback for those.
    std::string reply = selector.complete(prompt.system, prompt.user);

    SelectionDecision decision;
    decision.query_id = query.id;
    decision.raw_reply = reply;
    auto [kept, fallback] =
        parse_selection_reply(reply, static_cast<int>(top10.size()));
    decision.kept_indices = std::move(kept);
    decision.fallback_used = fallback;
    return decision;
}

} // namespace finrag
