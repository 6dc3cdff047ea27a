#include <doctest.h>

#include <atomic>
#include <cmath>
#include <random>
#include <thread>

#include "finrag/errors.hpp"
#include "finrag/sparse_index.hpp"
#include "finrag/tokenize.hpp"
#include "test_util.hpp"

using namespace finrag;

namespace {

std::vector<Chunk> make_chunks(const std::vector<std::string>& texts) {
    std::vector<Chunk> chunks;
    for (size_t i = 0; i < texts.size(); ++i) {
        Chunk c;
        c.doc_id = "d" + std::to_string(i);
        c.seq = 0;
        c.id = c.doc_id + "#0";
        c.text = texts[i];
        c.token_count = static_cast<int>(tokenize(texts[i]).size());
        chunks.push_back(std::move(c));
    }
    return chunks;
}

// Direct-formula BM25 oracle, independent of the inverted index: term
// statistics are recomputed by scanning token vectors.
double oracle_bm25(const std::vector<std::vector<std::string>>& docs,
                   const std::vector<std::string>& query, size_t doc, double k1,
                   double b) {
    double total_len = 0;
    for (const auto& d : docs) total_len += static_cast<double>(d.size());
    const double avg_len = total_len / static_cast<double>(docs.size());
    const double n = static_cast<double>(docs.size());

    double score = 0.0;
    for (const auto& term : query) {
        double df = 0;
        for (const auto& d : docs) {
            for (const auto& t : d)
                if (t == term) {
                    df += 1;
                    break;
                }
        }
        double tf = 0;
        for (const auto& t : docs[doc])
            if (t == term) tf += 1;
        if (tf == 0) continue;
        double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
        double tf_part = (tf * (k1 + 1.0)) /
                         (tf + k1 * (1.0 - b + b * docs[doc].size() / avg_len));
        score += idf * tf_part;
    }
    return score;
}

// Full-ranking oracle: score every doc, sort by (score desc, id asc), drop zeros.
std::vector<std::string> oracle_ranking(const SparseIndex& idx,
                                        const std::vector<std::vector<std::string>>& docs,
                                        const std::vector<std::string>& query) {
    std::vector<std::pair<std::string, double>> scored;
    for (size_t i = 0; i < docs.size(); ++i) {
        double s = oracle_bm25(docs, query, i, idx.params.k1, idx.params.b);
        if (s > 0) scored.emplace_back(idx.chunk_ids[i], s);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::vector<std::string> ids;
    for (auto& [id, s] : scored) ids.push_back(id);
    return ids;
}

} // namespace

TEST_CASE("build_sparse_index: postings and statistics on a toy corpus") {
    auto idx = build_sparse_index(make_chunks({"cat sat", "dog sat"}));
    CHECK(idx.num_docs == 2);
    CHECK(idx.avg_doc_length == 2.0);
    REQUIRE(idx.postings.count("cat"));
    REQUIRE(idx.postings.count("dog"));
    REQUIRE(idx.postings.count("sat"));
    CHECK(idx.postings.at("cat").size() == 1);
    CHECK(idx.postings.at("cat")[0].chunk_ordinal == 0);
    CHECK(idx.postings.at("dog")[0].chunk_ordinal == 1);
    CHECK(idx.postings.at("sat").size() == 2);
    CHECK(idx.postings.at("sat")[0].chunk_ordinal == 0);
    CHECK(idx.postings.at("sat")[1].chunk_ordinal == 1);

    auto single = build_sparse_index(make_chunks({"a a a"}));
    CHECK(single.postings.at("a")[0].term_frequency == 3);
    CHECK(single.doc_lengths == std::vector<int>{3});

    CHECK_THROWS_AS(build_sparse_index({}), DataError);
}

TEST_CASE("bm25_score matches the hand-evaluated formula") {
    auto idx = build_sparse_index(make_chunks({"cat sat", "dog sat"}));
    // df=1, N=2: idf = ln(2); tf part = 1 exactly at len == avg
    CHECK(bm25_score(idx, {"cat"}, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(bm25_score(idx, {"cat"}, 1) == 0.0);
    // df=N=2: idf = ln(1.2) for both docs
    CHECK(bm25_score(idx, {"sat"}, 0) ==
          doctest::Approx(std::log(1.2)).epsilon(1e-12));
    CHECK(bm25_score(idx, {"sat"}, 1) ==
          doctest::Approx(std::log(1.2)).epsilon(1e-12));
    CHECK(bm25_score(idx, {"absent", "terms"}, 0) == 0.0);
    CHECK_THROWS_AS(bm25_score(idx, {"cat"}, 2), DataError);
    CHECK_THROWS_AS(bm25_score(idx, {"cat"}, -1), DataError);
}

TEST_CASE("sparse_search ranks, truncates, and breaks ties by id") {
    auto idx = build_sparse_index(make_chunks({"cat sat", "dog sat"}));
    auto rl = sparse_search(idx, "cat", 10, "q1");
    REQUIRE(rl.entries.size() == 1);
    CHECK(rl.entries[0].doc_id == "d0#0");
    CHECK(rl.entries[0].score == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(rl.entries[0].rank == 1);
    CHECK(rl.query_id == "q1");

    CHECK(sparse_search(idx, "nothing matches here", 10).entries.empty());

    // two identical docs with ids "d10" and "d2": lexicographic puts d10 first
    std::vector<Chunk> tie_chunks;
    for (const auto* id : {"d2", "d10"}) {
        Chunk c;
        c.doc_id = id;
        c.seq = 0;
        c.id = id; // bare ids keep the lexicographic example visible
        c.text = "cash flow";
        c.token_count = 2;
        tie_chunks.push_back(c);
    }
    auto tie_idx = build_sparse_index(tie_chunks);
    auto tie = sparse_search(tie_idx, "cash", 10);
    REQUIRE(tie.entries.size() == 2);
    CHECK(tie.entries[0].doc_id == "d10");
    CHECK(tie.entries[1].doc_id == "d2");
}

TEST_CASE("sparse_search equals the exhaustive direct-formula oracle") {
    std::mt19937 rng(42);
    const std::vector<std::string> vocab = {"cash", "flow", "revenue", "margin",
                                            "asset", "debt", "fy21", "fy22",
                                            "growth", "net"};
    for (int trial = 0; trial < 120; ++trial) {
        std::uniform_int_distribution<int> n_docs(1, 50);
        std::uniform_int_distribution<int> n_tokens(1, 30);
        std::uniform_int_distribution<size_t> pick(0, vocab.size() - 1);

        int nd = n_docs(rng);
        std::vector<std::string> texts;
        std::vector<std::vector<std::string>> docs;
        for (int d = 0; d < nd; ++d) {
            int nt = n_tokens(rng);
            std::string text;
            std::vector<std::string> toks;
            for (int t = 0; t < nt; ++t) {
                const auto& w = vocab[pick(rng)];
                if (!text.empty()) text.push_back(' ');
                text += w;
                toks.push_back(w);
            }
            texts.push_back(text);
            docs.push_back(toks);
        }
        auto idx = build_sparse_index(make_chunks(texts));

        std::uniform_int_distribution<int> n_query(1, 4);
        int nq = n_query(rng);
        std::vector<std::string> query;
        std::string query_text;
        for (int t = 0; t < nq; ++t) {
            const auto& w = vocab[pick(rng)];
            if (!query_text.empty()) query_text.push_back(' ');
            query_text += w;
            query.push_back(w);
        }

        auto got = sparse_search(idx, query_text, nd);
        CHECK(testutil::doc_ids(got) == oracle_ranking(idx, docs, query));
        for (const auto& e : got.entries) CHECK(e.score > 0.0);

        // spot-check absolute scores against the direct formula
        for (const auto& e : got.entries) {
            size_t ord = 0;
            while (idx.chunk_ids[ord] != e.doc_id) ++ord;
            CHECK(e.score == doctest::Approx(oracle_bm25(docs, query, ord,
                                                         idx.params.k1, idx.params.b))
                                 .epsilon(1e-9));
        }
    }
}

TEST_CASE("bm25 monotonicity: more of a query term never lowers that doc's score") {
    std::mt19937 rng(9);
    const std::vector<std::string> vocab = {"alpha", "beta", "gamma", "delta"};
    std::uniform_int_distribution<size_t> pick(0, vocab.size() - 1);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::string> texts;
        for (int d = 0; d < 5; ++d) {
            std::string text;
            for (int t = 0; t < 8; ++t) {
                if (!text.empty()) text.push_back(' ');
                text += vocab[pick(rng)];
            }
            texts.push_back(text);
        }
        const std::string term = vocab[pick(rng)];
        auto before_idx = build_sparse_index(make_chunks(texts));
        double before = bm25_score(before_idx, {term}, 0);

        auto boosted = texts;
        boosted[0] += " " + term;
        auto after_idx = build_sparse_index(make_chunks(boosted));
        double after = bm25_score(after_idx, {term}, 0);
        CHECK(after >= before - 1e-12);
    }
}

TEST_CASE("index build is order-invariant up to ordinal relabeling") {
    std::vector<std::string> texts = {"cash flow statement", "net revenue growth",
                                      "revenue and cash", "debt margin fy21"};
    auto idx_a = build_sparse_index(make_chunks(texts));

    auto chunks = make_chunks(texts);
    std::reverse(chunks.begin(), chunks.end());
    auto idx_b = build_sparse_index(chunks);

    for (const char* q : {"cash revenue", "fy21", "net growth margin"}) {
        auto ra = sparse_search(idx_a, q, 10);
        auto rb = sparse_search(idx_b, q, 10);
        REQUIRE(ra.entries.size() == rb.entries.size());
        for (size_t i = 0; i < ra.entries.size(); ++i) {
            CHECK(ra.entries[i].doc_id == rb.entries[i].doc_id);
            CHECK(ra.entries[i].score ==
                  doctest::Approx(rb.entries[i].score).epsilon(1e-12));
        }
    }
}

TEST_CASE("a built index serves concurrent searches") {
    std::vector<std::string> texts;
    for (int i = 0; i < 40; ++i)
        texts.push_back("cash flow item " + std::to_string(i % 7) + " revenue");
    auto idx = build_sparse_index(make_chunks(texts));
    auto expected = sparse_search(idx, "cash revenue 3", 40);

    std::vector<std::thread> workers;
    std::atomic<int> mismatches{0};
    for (int t = 0; t < 4; ++t) {
        workers.emplace_back([&] {
            for (int i = 0; i < 50; ++i) {
                auto got = sparse_search(idx, "cash revenue 3", 40);
                if (testutil::doc_ids(got) != testutil::doc_ids(expected))
                    ++mismatches;
            }
        });
    }
    for (auto& w : workers) w.join();
    CHECK(mismatches == 0);
}

TEST_CASE("sparse index persistence round-trips") {
    testutil::TempDir tmp("sparse_idx");
    auto idx = build_sparse_index(make_chunks({"cat sat", "dog sat", "cat cat dog"}),
                                  0.9, 0.4);
    auto p = tmp.file("idx.json");
    save_sparse_index(idx, p);
    auto loaded = load_sparse_index(p);
    CHECK(loaded.num_docs == idx.num_docs);
    CHECK(loaded.avg_doc_length == idx.avg_doc_length);
    CHECK(loaded.chunk_ids == idx.chunk_ids);
    CHECK(loaded.doc_lengths == idx.doc_lengths);
    CHECK(loaded.params.k1 == idx.params.k1);
    CHECK(loaded.params.b == idx.params.b);
    REQUIRE(loaded.postings.size() == idx.postings.size());
    for (const auto& [term, plist] : idx.postings) {
        REQUIRE(loaded.postings.count(term));
        const auto& ll = loaded.postings.at(term);
        REQUIRE(ll.size() == plist.size());
        for (size_t i = 0; i < plist.size(); ++i) {
            CHECK(ll[i].chunk_ordinal == plist[i].chunk_ordinal);
            CHECK(ll[i].term_frequency == plist[i].term_frequency);
        }
    }
    // scoring through the loaded index is bit-identical
    auto a = sparse_search(idx, "cat dog", 10);
    auto b = sparse_search(loaded, "cat dog", 10);
    REQUIRE(a.entries.size() == b.entries.size());
    for (size_t i = 0; i < a.entries.size(); ++i)
        CHECK(a.entries[i].score == b.entries[i].score);

    CHECK_THROWS_AS(load_sparse_index(tmp.file("missing.json")), DataError);

    testutil::write_file(tmp.file("wrong_version.json"),
                         R"({"version":"finrag-sparse-v999"})");
    CHECK_THROWS_AS(load_sparse_index(tmp.file("wrong_version.json")), DataError);
}
