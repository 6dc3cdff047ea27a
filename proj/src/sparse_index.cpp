#include "finrag/sparse_index.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_map>

#include <json.hpp>

#include "finrag/errors.hpp"
#include "finrag/tokenize.hpp"

namespace finrag {

namespace {

constexpr const char* kIndexVersion = "finrag-sparse-v1";

double idf_for(int num_docs, int df) {
    return std::log(1.0 + (num_docs - df + 0.5) / (df + 0.5));
}

double tf_part(double tf, double len, double avg_len, const Bm25Params& p) {
    return (tf * (p.k1 + 1.0)) / (tf + p.k1 * (1.0 - p.b + p.b * len / avg_len));
}

} // namespace

double SparseIndex::idf(const std::string& term) const {
    auto it = postings.find(term);
    int df = it == postings.end() ? 0 : static_cast<int>(it->second.size());
    return idf_for(num_docs, df);
}

SparseIndex build_sparse_index(const std::vector<Chunk>& chunks, double k1, double b) {
    if (chunks.empty()) throw DataError("cannot build a sparse index over zero chunks");

    SparseIndex idx;
    idx.params = Bm25Params{k1, b};
    idx.num_docs = static_cast<int>(chunks.size());
    idx.chunk_ids.reserve(chunks.size());
    idx.doc_lengths.reserve(chunks.size());

    long long total_tokens = 0;
    for (size_t ord = 0; ord < chunks.size(); ++ord) {
        auto tokens = tokenize(chunks[ord].text);
        idx.chunk_ids.push_back(chunks[ord].id);
        idx.doc_lengths.push_back(static_cast<int>(tokens.size()));
        total_tokens += static_cast<long long>(tokens.size());

        std::unordered_map<std::string, int> tf;
        for (auto& t : tokens) ++tf[t];
        for (auto& [term, freq] : tf)
            idx.postings[term].push_back(Posting{static_cast<int>(ord), freq});
    }
    // Chunks are visited in ascending ordinal, so postings arrive sorted.
    idx.avg_doc_length = static_cast<double>(total_tokens) / idx.num_docs;
    if (idx.avg_doc_length <= 0.0)
        throw DataError("sparse index: corpus has no tokens");
    return idx;
}

double bm25_score(const SparseIndex& idx, const std::vector<std::string>& query_terms,
                  int chunk_ordinal) {
    if (chunk_ordinal < 0 || chunk_ordinal >= idx.num_docs)
        throw DataError("bm25_score: chunk ordinal " + std::to_string(chunk_ordinal) +
                        " out of range (num_docs=" + std::to_string(idx.num_docs) + ")");
    const double len = idx.doc_lengths[chunk_ordinal];
    double score = 0.0;
    for (const auto& term : query_terms) {
        auto it = idx.postings.find(term);
        if (it == idx.postings.end()) continue;
        const auto& plist = it->second;
        auto pit = std::lower_bound(plist.begin(), plist.end(), chunk_ordinal,
                                    [](const Posting& p, int ord) {
                                        return p.chunk_ordinal < ord;
                                    });
        if (pit == plist.end() || pit->chunk_ordinal != chunk_ordinal) continue;
        double w = idf_for(idx.num_docs, static_cast<int>(plist.size())) *
                   tf_part(pit->term_frequency, len, idx.avg_doc_length, idx.params);
        score += w;
    }
    return score;
}

RankedList sparse_search(const SparseIndex& idx, std::string_view query_text, int k,
                         std::string query_id) {
    if (k < 1) throw DataError("sparse_search: k must be >= 1");

    auto terms = tokenize(query_text);
    std::unordered_map<int, double> acc;
    for (const auto& term : terms) {
        auto it = idx.postings.find(term);
        if (it == idx.postings.end()) continue;
        const double idf = idf_for(idx.num_docs, static_cast<int>(it->second.size()));
        for (const auto& p : it->second) {
            acc[p.chunk_ordinal] += idf * tf_part(p.term_frequency,
                                                  idx.doc_lengths[p.chunk_ordinal],
                                                  idx.avg_doc_length, idx.params);
        }
    }

    std::vector<std::pair<int, double>> hits(acc.begin(), acc.end());
    std::sort(hits.begin(), hits.end(), [&](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return idx.chunk_ids[a.first] < idx.chunk_ids[b.first];
    });

    RankedList out;
    out.query_id = std::move(query_id);
    for (const auto& [ord, score] : hits) {
        if (score <= 0.0) continue;
        if (static_cast<int>(out.entries.size()) >= k) break;
        out.entries.push_back(RunEntry{idx.chunk_ids[ord], score,
                                       static_cast<int>(out.entries.size()) + 1});
    }
    return out;
}

void save_sparse_index(const SparseIndex& idx, const std::filesystem::path& path) {
    nlohmann::json j;
    j["version"] = kIndexVersion;
    j["k1"] = idx.params.k1;
    j["b"] = idx.params.b;
    j["num_docs"] = idx.num_docs;
    j["avg_doc_length"] = idx.avg_doc_length;
    j["chunk_ids"] = idx.chunk_ids;
    j["doc_lengths"] = idx.doc_lengths;
    auto& postings = j["postings"] = nlohmann::json::object();
    for (const auto& [term, plist] : idx.postings) {
        auto& arr = postings[term] = nlohmann::json::array();
        for (const auto& p : plist) arr.push_back({p.chunk_ordinal, p.term_frequency});
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write sparse index: " + path.string());
    out << j.dump(2) << '\n';
}

SparseIndex load_sparse_index(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open sparse index: " + path.string());
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded())
        throw DataError("sparse index is not valid JSON: " + path.string());
    if (j.value("version", "") != kIndexVersion)
        throw DataError("unsupported sparse index version in " + path.string());

    SparseIndex idx;
    idx.params = Bm25Params{j.at("k1").get<double>(), j.at("b").get<double>()};
    idx.num_docs = j.at("num_docs").get<int>();
    idx.avg_doc_length = j.at("avg_doc_length").get<double>();
    idx.chunk_ids = j.at("chunk_ids").get<std::vector<std::string>>();
    idx.doc_lengths = j.at("doc_lengths").get<std::vector<int>>();
    for (const auto& [term, arr] : j.at("postings").items()) {
        auto& plist = idx.postings[term];
        for (const auto& pair : arr)
            plist.push_back(Posting{pair.at(0).get<int>(), pair.at(1).get<int>()});
    }
    if (static_cast<int>(idx.chunk_ids.size()) != idx.num_docs ||
        idx.doc_lengths.size() != idx.chunk_ids.size())
        throw DataError("sparse index is inconsistent: " + path.string());
    return idx;
}

} // namespace finrag
