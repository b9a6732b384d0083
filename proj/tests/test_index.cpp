#include "doctest.h"

#include <cmath>
#include <random>

#include "qexp/index.hpp"
#include "test_support.hpp"

using namespace qexp;
using qexp::testing::brute_force_bm25;
using qexp::testing::relatively_close;
using qexp::testing::TempDir;

namespace {

Corpus corpus_of(std::vector<std::string> texts)
{
    std::vector<Document> docs;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        docs.push_back(Document{"d" + std::to_string(i + 1), texts[i]});
    }
    return Corpus(std::move(docs));
}

void check_invariants(const PostingIndex& index)
{
    double total = 0;
    for (auto len : index.doc_lengths()) {
        total += len;
    }
    CHECK(index.avg_doc_length() == doctest::Approx(total / static_cast<double>(index.doc_count())));
    for (std::uint32_t t = 0; t < index.term_count(); ++t) {
        auto list = index.postings(t);
        for (std::size_t i = 0; i < list.size(); ++i) {
            CHECK(list[i].tf >= 1);
            CHECK(list[i].tf <= index.doc_lengths()[list[i].doc]);
            if (i > 0) {
                CHECK(list[i - 1].doc < list[i].doc);
            }
        }
    }
}

}  // namespace

TEST_CASE("default parameters")
{
    Bm25Params p;
    CHECK(p.k1 == 0.9);
    CHECK(p.b == 0.4);
    CHECK_THROWS_AS((Bm25Params{-1.0, 0.4}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((Bm25Params{0.9, 1.5}.validate()), std::invalid_argument);
}

TEST_CASE("build_index counts")
{
    auto index = build_index(corpus_of({"a", "b", "a"}));
    // "a" is a stopword for the analyzer, so use analyzable words instead.
    auto idx = build_index(corpus_of({"apple", "berry", "apple"}));
    REQUIRE(idx.term_id("appl"));
    REQUIRE(idx.term_id("berri"));
    CHECK(idx.postings(*idx.term_id("appl")).size() == 2);
    CHECK(idx.postings(*idx.term_id("berri")).size() == 1);
    CHECK(idx.avg_doc_length() == 1.0);
    CHECK(index.term_count() == 1);  // only "b" survives
    check_invariants(idx);

    auto rep = build_index(corpus_of({"xylo xylo xylo"}));
    REQUIRE(rep.term_id("xylo"));
    CHECK(rep.postings(*rep.term_id("xylo"))[0].tf == 3);

    auto lengths = build_index(corpus_of({"red blue", "red blue green pink"}));
    CHECK(lengths.avg_doc_length() == 3.0);
}

TEST_CASE("empty corpus is an error")
{
    CHECK_THROWS_AS(build_index(Corpus{}), IndexError);
    CHECK_THROWS_AS(serial::build_index(Corpus{}), IndexError);
}

TEST_CASE("bm25_score closed forms")
{
    auto index = build_index(corpus_of({"river"}));
    const std::vector<std::string> q{"river"};
    // idf = ln(1 + 0.5/1.5), tf part = 1.9 / (1 + 0.9) = 1
    CHECK(bm25_score(index, q, 0) == doctest::Approx(std::log(4.0 / 3.0)).epsilon(1e-12));

    const std::vector<std::string> absent{"ocean"};
    CHECK(bm25_score(index, absent, 0) == 0.0);

    auto two = build_index(corpus_of({"river bank", "ocean wave"}));
    const std::vector<std::string> once{"river"};
    const std::vector<std::string> twice{"river", "river"};
    CHECK(bm25_score(two, twice, 0) == doctest::Approx(2 * bm25_score(two, once, 0)).epsilon(1e-12));
    CHECK_THROWS_AS(bm25_score(two, once, 2), std::out_of_range);
}

TEST_CASE("search_topk ordering rules")
{
    // d2 and d3 are identical, so they tie and come back in id order.
    Corpus corpus({Document{"z9", "river delta"}, Document{"b2", "river"}, Document{"a1", "river"},
                   Document{"c3", "mountain"}});
    auto index = build_index(corpus);
    auto hits = search_topk(index, "river", 10);
    REQUIRE(hits.size() == 3);  // only matching docs
    CHECK(hits[0].doc_id == "a1");
    CHECK(hits[1].doc_id == "b2");
    CHECK(hits[0].score == hits[1].score);
    CHECK(hits[2].doc_id == "z9");
    for (std::size_t i = 0; i < hits.size(); ++i) {
        CHECK(hits[i].rank == i + 1);
    }
    CHECK(search_topk(index, "river", 1).size() == 1);
    CHECK(search_topk(index, "the of and", 10).empty());
    CHECK(search_topk(index, "", 10).empty());
    CHECK_THROWS_AS(search_topk(index, "river", 0), std::invalid_argument);
}

TEST_CASE("search_topk on a 5-doc corpus equals the brute-force oracle")
{
    auto corpus = corpus_of({"volcanic ash cloud", "ash tree leaves", "cloud computing cluster",
                             "volcanic eruption ash ash", "tree house"});
    auto index = build_index(corpus);
    auto hits = search_topk(index, "volcanic ash", 10);
    auto oracle = brute_force_bm25(corpus, "volcanic ash", 0.9, 0.4, 10);
    REQUIRE(hits.size() == oracle.size());
    REQUIRE(hits.size() == 3);
    for (std::size_t i = 0; i < hits.size(); ++i) {
        CHECK(hits[i].doc_id == oracle[i].doc_id);
        CHECK(relatively_close(hits[i].score, oracle[i].score, 1e-9));
    }
    CHECK(hits[0].doc_id == "d4");
}

TEST_CASE("parallel and serial kernels agree exactly")
{
    std::mt19937_64 rng(1234);
    for (int trial = 0; trial < 20; ++trial) {
        auto corpus = qexp::testing::random_corpus(rng, 150, 40);
        Bm25Params params{0.5 + 0.1 * trial, 0.05 * trial};
        auto par = build_index(corpus, params);
        auto ser = serial::build_index(corpus, params);
        CHECK(par == ser);
        check_invariants(par);
        for (int q = 0; q < 10; ++q) {
            auto query = qexp::testing::random_query(rng, 40);
            auto a = search_topk(par, query, 25);
            auto b = serial::search_topk(par, query, 25);
            REQUIRE(a.size() == b.size());
            for (std::size_t i = 0; i < a.size(); ++i) {
                CHECK(a[i].doc_id == b[i].doc_id);
                CHECK(a[i].score == b[i].score);
            }
        }
    }
}

TEST_CASE("scores are non-negative and monotone in tf")
{
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 30; ++trial) {
        auto corpus = qexp::testing::random_corpus(rng, 60, 20);
        auto index = build_index(corpus);
        for (std::size_t d = 0; d < index.doc_count(); ++d) {
            auto terms = analyze(qexp::testing::random_query(rng, 20));
            CHECK(bm25_score(index, terms, d) >= 0.0);
        }
    }
    // Swap one "filler" occurrence for "target", keeping the length fixed.
    Corpus before({Document{"d1", "target filler filler other"}, Document{"d2", "target stuff"},
                   Document{"d3", "other words"}});
    Corpus after({Document{"d1", "target target filler other"}, Document{"d2", "target stuff"},
                  Document{"d3", "other words"}});
    const std::vector<std::string> q{"target"};
    CHECK(bm25_score(build_index(after), q, 0) >= bm25_score(build_index(before), q, 0));
}

TEST_CASE("save and load round-trip")
{
    TempDir dir;
    std::mt19937_64 rng(5);
    auto corpus = qexp::testing::random_corpus(rng, 80, 30);
    std::vector<Document> docs = corpus.docs();
    docs.push_back(Document{"id with spaces\tand \"quotes\"", "w1x w2x"});
    Corpus tricky(std::move(docs));
    auto index = build_index(tricky, Bm25Params{1.2, 0.75});
    index.save(dir / "idx.txt");
    auto loaded = PostingIndex::load(dir / "idx.txt");
    CHECK(loaded == index);
    CHECK(loaded.params().k1 == 1.2);
    for (int q = 0; q < 10; ++q) {
        auto query = qexp::testing::random_query(rng, 30);
        auto a = search_topk(index, query, 50);
        auto b = search_topk(loaded, query, 50);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].doc_id == b[i].doc_id);
            CHECK(a[i].score == b[i].score);
        }
    }
}

TEST_CASE("load rejects corrupt files")
{
    TempDir dir;
    qexp::testing::write_text(dir / "bad1", "not-an-index 1\n");
    CHECK_THROWS_AS(PostingIndex::load(dir / "bad1"), IndexError);
    qexp::testing::write_text(dir / "bad2", "qexp-index\t2\n");
    CHECK_THROWS_WITH_AS(PostingIndex::load(dir / "bad2"), doctest::Contains("version"), IndexError);
    qexp::testing::write_text(dir / "bad3",
                              "qexp-index\t1\nparams\t0.9\t0.4\ndocs\t1\n\"d1\"\t1\nterms\t1\nfoo\t1\t0:5\nend\n");
    CHECK_THROWS_AS(PostingIndex::load(dir / "bad3"), IndexError);  // tf > doc length
    qexp::testing::write_text(dir / "bad4", "qexp-index\t1\nparams\t0.9\t0.4\ndocs\t1\n\"d1\"\t1\n");
    CHECK_THROWS_WITH_AS(PostingIndex::load(dir / "bad4"), doctest::Contains("end of file"), IndexError);
    CHECK_THROWS_AS(PostingIndex::load(dir / "missing"), IndexError);
}

TEST_CASE("mathematically tied scores rank by doc id")
{
    // tf 4 in 25 tokens and tf 3 in 13 tokens saturate identically when the
    // average length is 46/3; the two sums differ only by rounding.
    std::vector<Document> docs;
    auto filler = [](std::size_t n, std::size_t from) {
        std::string s;
        for (std::size_t i = 0; i < n; ++i) {
            s += " " + qexp::testing::vocab_word(from + i);
        }
        return s;
    };
    docs.push_back({"b", "w0x w0x w0x w0x" + filler(21, 100)});
    docs.push_back({"a", "w0x w0x w0x" + filler(10, 200)});
    docs.push_back({"c", filler(8, 300)});
    Corpus corpus(std::move(docs));
    auto index = build_index(corpus);
    REQUIRE(index.avg_doc_length() == doctest::Approx(46.0 / 3.0));
    auto hits = search_topk(index, "w0x", 10);
    REQUIRE(hits.size() == 2);
    CHECK(hits[0].doc_id == "a");
    CHECK(hits[1].doc_id == "b");
    CHECK(search_topk(index, "w0x", 1)[0].doc_id == "a");
    CHECK(serial::search_topk(index, "w0x", 1)[0].doc_id == "a");
}

TEST_CASE("truncated rankings match the oracle")
{
    std::mt19937_64 rng(31337);
    for (int trial = 0; trial < 200; ++trial) {
        auto corpus = qexp::testing::random_corpus(rng, 120, 12);
        auto index = build_index(corpus);
        auto query = qexp::testing::random_query(rng, 12);
        const std::size_t k = rng() % 15 + 1;
        auto got = search_topk(index, query, k);
        auto ref = serial::search_topk(index, query, k);
        auto oracle = brute_force_bm25(corpus, query, 0.9, 0.4, k);
        REQUIRE(got.size() == oracle.size());
        REQUIRE(ref.size() == oracle.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].doc_id == oracle[i].doc_id);
            CHECK(ref[i].doc_id == oracle[i].doc_id);
        }
    }
}
