#include "finrag/preprocess.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "finrag/errors.hpp"
#include "finrag/tokenize.hpp"

namespace finrag {

namespace {

void warn(std::vector<std::string>* sink, std::string msg) {
    if (sink)
        sink->push_back(std::move(msg));
    else
        std::cerr << "warning: " << msg << "\n";
}

} // namespace

void PreprocessConfig::validate() const {
    if (max_tokens < 1) throw ConfigError("max_tokens must be >= 1");
    if (chunk_overlap < 0) throw ConfigError("chunk_overlap must be >= 0");
    if (chunk_overlap >= max_tokens)
        throw ConfigError("chunk_overlap must be < max_tokens");
    if (keyword_top_k < 1) throw ConfigError("keyword_top_k must be >= 1");
}

const std::set<std::string>& default_stopwords() {
    static const std::set<std::string> words = {
        "a",    "an",   "and",  "are",  "as",   "at",   "be",   "by",   "did",
        "do",   "does", "for",  "from", "had",  "has",  "have", "how",  "in",
        "is",   "it",   "its",  "of",   "on",   "or",   "that", "the",  "their",
        "there", "these", "this", "to",  "was",  "were", "what", "when", "where",
        "which", "who",  "why",  "will", "with"};
    return words;
}

std::vector<Chunk> chunk_document(const Document& doc, const PreprocessConfig& cfg,
                                  std::vector<std::string>* warnings) {
    cfg.validate();
    auto tokens = tokenize(doc.text);
    if (tokens.empty()) {
        warn(warnings, "document '" + doc.id + "' has no tokens, producing no chunks");
        return {};
    }

    const size_t max_tokens = static_cast<size_t>(cfg.max_tokens);
    const size_t stride = max_tokens - static_cast<size_t>(cfg.chunk_overlap);
    std::vector<Chunk> chunks;
    size_t start = 0;
    int seq = 0;
    for (;;) {
        size_t len = std::min(max_tokens, tokens.size() - start);
        std::string text;
        for (size_t i = start; i < start + len; ++i) {
            if (i > start) text.push_back(' ');
            text += tokens[i];
        }
        Chunk c;
        c.doc_id = doc.id;
        c.seq = seq;
        c.id = doc.id + "#" + std::to_string(seq);
        c.text = std::move(text);
        c.token_count = static_cast<int>(len);
        chunks.push_back(std::move(c));

        if (start + len >= tokens.size()) break;
        start += stride;
        ++seq;
    }
    return chunks;
}

// ---------------------------------------------------------------------------
// Markdown restructuring
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    size_t start = 0;
    while (true) {
        size_t nl = text.find('\n', start);
        if (nl == std::string_view::npos) {
            lines.emplace_back(text.substr(start));
            break;
        }
        std::string line(text.substr(start, nl - start));
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(std::move(line));
        start = nl + 1;
    }
    return lines;
}

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

bool is_blank(const std::string& line) { return trim(line).empty(); }

// Splits a line into table cells on tabs, or on runs of 2+ spaces when it has
// no tabs. Returns an empty vector when the line does not look tabular.
std::vector<std::string> table_cells(const std::string& line) {
    std::string t = trim(line);
    if (t.empty() || t.front() == '|') return {};
    std::vector<std::string> cells;
    if (t.find('\t') != std::string::npos) {
        std::istringstream ss(t);
        std::string cell;
        while (std::getline(ss, cell, '\t')) {
            cell = trim(cell);
            if (!cell.empty()) cells.push_back(cell);
        }
    } else {
        size_t i = 0;
        while (i < t.size()) {
            size_t gap = t.find("  ", i);
            if (gap == std::string::npos) {
                cells.push_back(trim(t.substr(i)));
                break;
            }
            cells.push_back(trim(t.substr(i, gap - i)));
            i = t.find_first_not_of(' ', gap);
            if (i == std::string::npos) break;
        }
        cells.erase(std::remove_if(cells.begin(), cells.end(),
                                   [](const std::string& c) { return c.empty(); }),
                    cells.end());
    }
    if (cells.size() < 2) return {};
    return cells;
}

// Bullet markers normalized by rule (c): •, – (en dash), *.
bool strip_bullet(const std::string& line, std::string& out) {
    size_t indent = line.find_first_not_of(" \t");
    if (indent == std::string::npos) return false;
    std::string_view rest(line.data() + indent, line.size() - indent);
    size_t marker_len = 0;
    if (rest.starts_with("\xE2\x80\xA2") || rest.starts_with("\xE2\x80\x93"))
        marker_len = 3;
    else if (rest.starts_with("*"))
        marker_len = 1;
    if (marker_len == 0) return false;
    if (rest.size() <= marker_len || rest[marker_len] != ' ') return false;
    size_t content = rest.find_first_not_of(' ', marker_len);
    out = line.substr(0, indent) + "- " +
          std::string(rest.substr(content == std::string_view::npos ? rest.size()
                                                                    : content));
    return true;
}

bool is_heading_candidate(const std::string& line) {
    std::string t = trim(line);
    if (t.empty() || t.size() >= 80) return false;
    switch (t.front()) {
        case '#': case '|': case '-': case '>': case '=': return false;
        default: break;
    }
    bool has_alpha = false;
    std::istringstream ss(t);
    std::string word;
    while (ss >> word) {
        char c = word.front();
        if ((c >= 'a' && c <= 'z')) return false; // lowercase-initial word
        if (c >= 'A' && c <= 'Z') has_alpha = true;
        // digit- or punctuation-initial words ("7.", "$192") don't disqualify
        for (char w : word)
            if ((w >= 'a' && w <= 'z') || (w >= 'A' && w <= 'Z')) has_alpha = true;
    }
    return has_alpha;
}

} // namespace

std::string restructure_markdown(std::string_view text) {
    auto lines = split_lines(text);
    const size_t n = lines.size();

    // Pass 1: find maximal runs of >= 2 tabular lines with equal cell counts.
    std::vector<std::pair<size_t, size_t>> table_runs; // [begin, end)
    std::vector<std::vector<std::vector<std::string>>> run_cells;
    size_t i = 0;
    while (i < n) {
        auto cells = table_cells(lines[i]);
        if (cells.empty()) {
            ++i;
            continue;
        }
        size_t j = i + 1;
        std::vector<std::vector<std::string>> rows{cells};
        while (j < n) {
            auto next = table_cells(lines[j]);
            if (next.size() != cells.size()) break;
            rows.push_back(std::move(next));
            ++j;
        }
        if (rows.size() >= 2) {
            table_runs.emplace_back(i, j);
            run_cells.push_back(std::move(rows));
        }
        i = j > i + 1 ? j : i + 1;
    }

    std::vector<std::string> out_lines;
    out_lines.reserve(n + table_runs.size());
    size_t run_idx = 0;
    for (size_t k = 0; k < n; ++k) {
        if (run_idx < table_runs.size() && table_runs[run_idx].first == k) {
            const auto& rows = run_cells[run_idx];
            const size_t cols = rows.front().size();
            for (size_t r = 0; r < rows.size(); ++r) {
                std::string row = "|";
                for (const auto& cell : rows[r]) row += " " + cell + " |";
                out_lines.push_back(std::move(row));
                if (r == 0) {
                    std::string sep = "|";
                    for (size_t c2 = 0; c2 < cols; ++c2) sep += " --- |";
                    out_lines.push_back(std::move(sep));
                }
            }
            k = table_runs[run_idx].second - 1;
            ++run_idx;
            continue;
        }

        std::string line = lines[k];
        std::string bulleted;
        if (strip_bullet(line, bulleted)) {
            line = bulleted;
        } else if (is_heading_candidate(line) && k + 1 < n && is_blank(lines[k + 1])) {
            line = "## " + trim(line);
        }
        out_lines.push_back(std::move(line));
    }

    std::string out;
    for (size_t k = 0; k < out_lines.size(); ++k) {
        if (k > 0) out.push_back('\n');
        out += out_lines[k];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Tables
// ---------------------------------------------------------------------------

Table table_from_json(const nlohmann::json& j) {
    Table t;
    if (!j.is_object() || !j.contains("row_headers") || !j.contains("col_headers") ||
        !j.contains("cells"))
        throw DataError("table JSON needs row_headers, col_headers, and cells");
    t.row_headers = j.at("row_headers").get<std::vector<std::string>>();
    t.col_headers = j.at("col_headers").get<std::vector<std::string>>();
    t.cells = j.at("cells").get<std::vector<std::vector<std::string>>>();
    if (j.contains("unit_hint") && !j.at("unit_hint").is_null())
        t.unit_hint = j.at("unit_hint").get<std::string>();
    return t;
}

std::vector<std::string> augment_table(const Table& t) {
    if (t.cells.size() != t.row_headers.size())
        throw DataError("table has " + std::to_string(t.cells.size()) +
                        " cell rows but " + std::to_string(t.row_headers.size()) +
                        " row headers");
    for (const auto& row : t.cells)
        if (row.size() != t.col_headers.size())
            throw DataError("table row has " + std::to_string(row.size()) +
                            " cells but there are " +
                            std::to_string(t.col_headers.size()) + " column headers");
    for (const auto& h : t.row_headers)
        if (trim(h).empty()) throw DataError("empty row header path");
    for (const auto& h : t.col_headers)
        if (trim(h).empty()) throw DataError("empty column header path");

    std::vector<std::string> lines;
    for (size_t r = 0; r < t.cells.size(); ++r) {
        for (size_t c = 0; c < t.cells[r].size(); ++c) {
            std::string cell = trim(t.cells[r][c]);
            if (cell.empty()) continue;
            std::string line = t.row_headers[r] + ", " + t.col_headers[c] + " = " + cell;
            if (t.unit_hint) line += " (" + *t.unit_hint + ")";
            lines.push_back(std::move(line));
        }
    }
    return lines;
}

std::string extract_tables(std::string_view text) {
    auto lines = split_lines(text);
    auto is_table_line = [](const std::string& line) {
        std::string t = trim(line);
        return t.size() >= 2 && t.front() == '|' && t.back() == '|';
    };

    std::string out;
    size_t i = 0;
    while (i < lines.size()) {
        if (!is_table_line(lines[i])) {
            ++i;
            continue;
        }
        size_t j = i;
        while (j < lines.size() && is_table_line(lines[j])) ++j;
        if (!out.empty()) out += "\n\n";
        for (size_t k = i; k < j; ++k) {
            if (k > i) out.push_back('\n');
            out += lines[k];
        }
        i = j;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Query transforms
// ---------------------------------------------------------------------------

std::string extract_keywords(const Query& q, const PreprocessConfig& cfg,
                             const SparseIndex& idf_source,
                             std::vector<std::string>* warnings) {
    cfg.validate();
    const auto& stopwords = cfg.stopwords.empty() ? default_stopwords() : cfg.stopwords;

    struct Term {
        std::string surface;
        std::string lower;
        size_t first_pos;
        double idf;
    };
    std::vector<Term> terms;
    std::map<std::string, size_t> seen; // lower form -> index in terms
    size_t pos = 0;
    for (auto& span : tokenize_spans(q.text)) {
        if (!stopwords.count(span.lower) && !seen.count(span.lower)) {
            seen[span.lower] = terms.size();
            double idf = idf_source.idf(span.lower);
            terms.push_back(Term{std::move(span.surface), std::move(span.lower), pos, idf});
        }
        ++pos;
    }

    if (terms.empty()) {
        warn(warnings, "query '" + q.id + "' is all stopwords; keeping original text");
        return q.text;
    }

    std::vector<size_t> order(terms.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (terms[a].idf != terms[b].idf) return terms[a].idf > terms[b].idf;
        return terms[a].first_pos < terms[b].first_pos;
    });
    order.resize(std::min<size_t>(order.size(), static_cast<size_t>(cfg.keyword_top_k)));
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return terms[a].first_pos < terms[b].first_pos;
    });

    std::string out;
    for (size_t i = 0; i < order.size(); ++i) {
        if (i > 0) out.push_back(' ');
        out += terms[order[i]].surface;
    }
    return out;
}

std::string expand_query(const Query& q, const TextTransformProvider& provider,
                         const std::filesystem::path& cache_path) {
    // Cache hit wins; no provider call.
    {
        std::ifstream in(cache_path);
        std::string line;
        size_t line_no = 0;
        while (in && std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            auto j = nlohmann::json::parse(line, nullptr, false);
            if (j.is_discarded() || !j.is_object())
                throw DataError(cache_path.string() + ":" + std::to_string(line_no) +
                                ": malformed expansion cache line");
            if (j.value("query_id", "") == q.id)
                return j.at("expanded_text").get<std::string>();
        }
    }

    std::string expanded;
    try {
        auto outputs = provider.transform({q.text});
        if (outputs.size() != 1)
            throw ProviderError("expansion provider returned " +
                                std::to_string(outputs.size()) + " outputs for 1 input");
        expanded = std::move(outputs.front());
    } catch (const ProviderError& e) {
        throw ProviderError("query '" + q.id + "' is not cached and expansion failed: " +
                            e.what());
    }
    // Append-only contract: the original query text must prefix the result.
    if (expanded.rfind(q.text, 0) != 0)
        expanded = q.text + " " + expanded;

    std::ofstream out(cache_path, std::ios::app);
    if (!out)
        throw DataError("cannot append to expansion cache: " + cache_path.string());
    nlohmann::json j;
    j["query_id"] = q.id;
    j["expanded_text"] = expanded;
    out << j.dump() << '\n';
    return expanded;
}

} // namespace finrag
