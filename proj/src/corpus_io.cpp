#include "finrag/corpus_io.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "finrag/errors.hpp"

namespace finrag {

namespace {

using nlohmann::json;

std::ifstream open_or_throw(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path.string());
    return in;
}

json parse_jsonl_line(const std::string& line, const std::filesystem::path& path,
                      size_t line_no) {
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw DataError(path.string() + ":" + std::to_string(line_no) +
                        ": malformed JSON line");
    return j;
}

std::string require_string(const json& j, const char* key,
                           const std::filesystem::path& path, size_t line_no) {
    if (!j.contains(key) || !j.at(key).is_string())
        throw DataError(path.string() + ":" + std::to_string(line_no) +
                        ": missing string field '" + key + "'");
    return j.at(key).get<std::string>();
}

void warn(std::vector<std::string>* sink, std::string msg) {
    if (sink)
        sink->push_back(std::move(msg));
    else
        std::cerr << "warning: " << msg << "\n";
}

} // namespace

std::vector<Document> load_corpus(const std::filesystem::path& path) {
    auto in = open_or_throw(path);
    std::vector<Document> docs;
    std::set<std::string> seen;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j = parse_jsonl_line(line, path, line_no);
        Document d;
        d.id = require_string(j, "_id", path, line_no);
        d.text = require_string(j, "text", path, line_no);
        d.title = j.value("title", std::string{});
        if (d.id.empty())
            throw DataError(path.string() + ":" + std::to_string(line_no) +
                            ": empty _id");
        if (d.text.empty())
            throw DataError(path.string() + ":" + std::to_string(line_no) +
                            ": empty text for document '" + d.id + "'");
        if (!seen.insert(d.id).second)
            throw DataError(path.string() + ": duplicate document id '" + d.id + "'");
        docs.push_back(std::move(d));
    }
    return docs;
}

std::vector<Query> load_queries(const std::filesystem::path& path) {
    auto in = open_or_throw(path);
    std::vector<Query> queries;
    std::set<std::string> seen;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j = parse_jsonl_line(line, path, line_no);
        Query q;
        q.id = require_string(j, "_id", path, line_no);
        q.text = require_string(j, "text", path, line_no);
        if (q.id.empty())
            throw DataError(path.string() + ":" + std::to_string(line_no) +
                            ": empty _id");
        if (q.text.empty())
            throw DataError(path.string() + ":" + std::to_string(line_no) +
                            ": empty text for query '" + q.id + "'");
        if (!seen.insert(q.id).second)
            throw DataError(path.string() + ": duplicate query id '" + q.id + "'");
        queries.push_back(std::move(q));
    }
    return queries;
}

Qrels load_qrels(const std::filesystem::path& path, std::vector<std::string>* warnings) {
    auto in = open_or_throw(path);
    std::string line;
    if (!std::getline(in, line))
        throw DataError(path.string() + ": empty qrels file (header expected)");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "query-id\tcorpus-id\tscore")
        throw DataError(path.string() +
                        ": missing qrels header 'query-id\\tcorpus-id\\tscore'");

    Qrels qrels;
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string qid, did, score_str;
        if (!std::getline(ss, qid, '\t') || !std::getline(ss, did, '\t') ||
            !std::getline(ss, score_str))
            throw DataError(path.string() + ":" + std::to_string(line_no) +
                            ": expected 3 tab-separated columns");
        int score = 0;
        size_t consumed = 0;
        try {
            score = std::stoi(score_str, &consumed);
        } catch (const std::exception&) {
            consumed = std::string::npos;
        }
        if (consumed != score_str.size() || score < 0)
            throw DataError(path.string() + ":" + std::to_string(line_no) +
                            ": relevance score must be a non-negative integer, got '" +
                            score_str + "'");
        auto& per_query = qrels.judgments[qid];
        auto [it, inserted] = per_query.emplace(did, score);
        if (!inserted) {
            warn(warnings, path.string() + ":" + std::to_string(line_no) +
                               ": duplicate judgment for (" + qid + ", " + did +
                               "), keeping the later value");
            it->second = score;
        }
    }
    return qrels;
}

void save_run(const std::vector<RankedList>& runs, const std::string& tag,
              const std::filesystem::path& path) {
    for (const auto& rl : runs) rl.validate();
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write run file: " + path.string());
    char buf[64];
    for (const auto& rl : runs) {
        for (const auto& e : rl.entries) {
            std::snprintf(buf, sizeof(buf), "%.6f", e.score);
            out << rl.query_id << " Q0 " << e.doc_id << ' ' << e.rank << ' ' << buf
                << ' ' << tag << '\n';
        }
    }
    if (!out.flush())
        throw DataError("failed writing run file: " + path.string());
}

std::vector<RankedList> load_run(const std::filesystem::path& path) {
    auto in = open_or_throw(path);
    std::vector<RankedList> runs;
    std::map<std::string, size_t> index_of; // query -> position in runs
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string qid, q0, did, tag;
        int rank = 0;
        double score = 0.0;
        if (!(ss >> qid >> q0 >> did >> rank >> score >> tag) || q0 != "Q0")
            throw DataError(path.string() + ":" + std::to_string(line_no) +
                            ": malformed run line");
        auto [it, inserted] = index_of.emplace(qid, runs.size());
        if (inserted) runs.push_back(RankedList{qid, {}});
        runs[it->second].entries.push_back(RunEntry{did, score, rank});
    }
    for (const auto& rl : runs) rl.validate();
    return runs;
}

} // namespace finrag
