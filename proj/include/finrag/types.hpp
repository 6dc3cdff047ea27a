#pragma once

#include <map>
#include <string>
#include <vector>

namespace finrag {

/// A corpus document as ingested (before chunking).
struct Document {
    std::string id;
    std::string title;
    std::string text;
};

/// A retrieval unit produced by chunking. id is always doc_id + "#" + seq.
struct Chunk {
    std::string id;
    std::string doc_id;
    int seq = 0;
    std::string text;
    int token_count = 0;
};

struct Query {
    std::string id;
    std::string text;
};

/// Relevance judgments: query_id -> doc_id -> integer grade (>= 0).
struct Qrels {
    std::map<std::string, std::map<std::string, int>> judgments;

    const std::map<std::string, int>* find(const std::string& query_id) const {
        auto it = judgments.find(query_id);
        return it == judgments.end() ? nullptr : &it->second;
    }

    bool has_positive(const std::string& query_id) const {
        const auto* j = find(query_id);
        if (!j) return false;
        for (const auto& [doc, grade] : *j)
            if (grade > 0) return true;
        return false;
    }
};

struct RunEntry {
    std::string doc_id;
    double score = 0.0;
    int rank = 0; // 1-based
};

/// One query's ranked retrieval result. Ranks are 1..n contiguous, scores
/// non-increasing, doc ids unique.
struct RankedList {
    std::string query_id;
    std::vector<RunEntry> entries;

    /// Throws DataError if the invariants above do not hold.
    void validate() const;
};

} // namespace finrag
