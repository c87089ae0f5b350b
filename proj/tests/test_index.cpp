#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <map>
#include <random>

#include "doctest.h"
#include "gridrag/errors.hpp"
#include "gridrag/index.hpp"
#include "gridrag/util/strings.hpp"
#include "gridrag/workbook.hpp"

using namespace gridrag;
namespace fs = std::filesystem;

static Chunk text_chunk(const std::string& id, const std::string& text) {
    Chunk c;
    c.chunk_id = id;
    c.kind = ChunkKind::row;
    c.workbook_id = "wb";
    c.sheet = "S";
    c.row_span = {1, 1};
    c.col_span = {1, 3};
    c.text = text;
    return c;
}

TEST_CASE("mock embedder is deterministic and unit-norm") {
    MockEmbedder e;
    CHECK(e.dimension() == 64);
    CHECK(e.id() == "mock-trigram-64");
    auto v1 = e.embed_text("quarterly revenue by region");
    auto v2 = e.embed_text("quarterly revenue by region");
    CHECK(v1.values == v2.values);
    double norm = 0.0;
    for (float x : v1.values) norm += double(x) * x;
    CHECK(std::abs(norm - 1.0) < 1e-6);
    // images embed through their alt text
    auto vi = e.embed_image({1, 2, 3}, "a chart");
    auto vt = e.embed_image({9, 9, 9}, "a chart");
    CHECK(vi.values == vt.values);
    CHECK_THROWS_AS(make_embedder("gpt-embeddings"), Error);
}

TEST_CASE("rrf worked example") {
    RankedList a{"dense:row", {{"x", 0.9}, {"y", 0.8}}};
    RankedList b{"lexical:row", {{"z", 5.0}, {"x", 4.0}}};
    FusedResult fused = rrf_fuse({a, b});
    // x is rank 1 and rank 2: 1/61 + 1/62
    REQUIRE(!fused.entries.empty());
    CHECK(fused.entries[0].chunk_id == "x");
    CHECK(fused.entries[0].rrf_score == doctest::Approx(1.0 / 61 + 1.0 / 62).epsilon(1e-12));
    CHECK(fused.entries[0].rrf_score == doctest::Approx(0.032522).epsilon(1e-4));
    // y and z tie at 1/62 and 1/61 respectively; z ahead of y
    CHECK(fused.entries[1].chunk_id == "z");
    CHECK(fused.entries[1].rrf_score == doctest::Approx(1.0 / 61).epsilon(1e-12));
    CHECK(fused.entries[0].contributing.size() == 2);
}

TEST_CASE("rrf ties break by chunk_id ascending") {
    RankedList a{"a", {{"bbb", 1.0}}};
    RankedList b{"b", {{"aaa", 1.0}}};
    FusedResult fused = rrf_fuse({a, b});
    REQUIRE(fused.entries.size() == 2);
    CHECK(fused.entries[0].chunk_id == "aaa");
    CHECK(fused.entries[1].chunk_id == "bbb");
}

TEST_CASE("rrf agrees with a brute-force reference on random instances") {
    std::mt19937 rng(42);
    for (int trial = 0; trial < 500; ++trial) {
        int n_lists = 1 + int(rng() % 4);
        std::vector<RankedList> lists;
        std::map<std::string, double> reference;
        for (int l = 0; l < n_lists; ++l) {
            RankedList list;
            list.source = "src" + std::to_string(l);
            int n = 1 + int(rng() % 8);
            std::vector<std::string> pool = {"a", "b", "c", "d", "e", "f", "g", "h"};
            std::shuffle(pool.begin(), pool.end(), rng);
            for (int i = 0; i < n; ++i) {
                list.entries.push_back({pool[std::size_t(i)], double(n - i)});
                reference[pool[std::size_t(i)]] += 1.0 / (60 + i + 1);
            }
            lists.push_back(std::move(list));
        }
        FusedResult fused = rrf_fuse(lists, FusionConfig{60, 100});
        CHECK(fused.entries.size() == reference.size());
        for (const auto& e : fused.entries)
            CHECK(std::abs(e.rrf_score - reference.at(e.chunk_id)) < 1e-12);
        for (std::size_t i = 1; i < fused.entries.size(); ++i)
            CHECK(fused.entries[i - 1].rrf_score >= fused.entries[i].rrf_score);
    }
}

TEST_CASE("bm25 idf hand value") {
    // 3 docs, term "apple" in exactly one: idf = ln((3-1+0.5)/(1+0.5)+1) = 0.9808
    MockEmbedder e;
    std::vector<Chunk> chunks = {text_chunk("wb/S/row/r1", "apple pie recipe"),
                                 text_chunk("wb/S/row/r2", "banana bread recipe"),
                                 text_chunk("wb/S/row/r3", "cherry cake recipe")};
    Index index = Index::build(chunks, e);
    RankedList hits = index.lexical_search("apple", std::nullopt, {}, 10);
    REQUIRE(hits.entries.size() == 1);  // zero-score docs never appear
    CHECK(hits.entries[0].chunk_id == "wb/S/row/r1");
    // doc length 3 equals average, so the tf term is tf*(k1+1)/(tf+k1) = 2.2/2.2 = 1
    CHECK(hits.entries[0].score == doctest::Approx(std::log(2.5 / 1.5 + 1.0)).epsilon(1e-12));
    CHECK(hits.entries[0].score == doctest::Approx(0.9808).epsilon(1e-4));
}

TEST_CASE("hybrid search fuses per-kind ranked lists") {
    MockEmbedder e;
    std::vector<Chunk> chunks;
    for (int i = 1; i <= 12; ++i)
        chunks.push_back(text_chunk("wb/S/row/r" + std::to_string(i),
                                    "filler content number " + std::to_string(i)));
    chunks.push_back(text_chunk("wb/S/row/r99", "zephyr inventory stock"));
    Index index = Index::build(chunks, e);
    auto hits = index.hybrid_search("zephyr inventory", std::nullopt, {});
    REQUIRE(!hits.empty());
    CHECK(hits[0].chunk->chunk_id == "wb/S/row/r99");
    CHECK(hits.size() <= 10);

    // coordinate filter drops non-covering chunks
    CoordFilter coords;
    coords.row = 1;
    auto filtered = index.dense_search("content", std::nullopt, coords, 10);
    for (const auto& entry : filtered.entries)
        CHECK(index.find_chunk(entry.chunk_id)->row_span.first == 1);
}

TEST_CASE("build rejects duplicate ids and unembeddable chunks") {
    MockEmbedder e;
    std::vector<Chunk> dup = {text_chunk("same", "a"), text_chunk("same", "b")};
    CHECK_THROWS_AS(Index::build(dup, e), DuplicateChunkId);
    // a chunk with no trigram content embeds to the zero vector
    std::vector<Chunk> bad = {text_chunk("wb/S/row/r1", "ok text here"),
                              text_chunk("wb/S/row/r2", "")};
    CHECK_THROWS_AS(Index::build(bad, e), EmbedderFailure);
}

TEST_CASE("persist and load round trip preserves rankings") {
    MockEmbedder e;
    std::vector<Chunk> chunks;
    for (int i = 1; i <= 30; ++i)
        chunks.push_back(text_chunk("wb/S/row/r" + std::to_string(i),
                                    "row " + std::to_string(i) + " sales figure " +
                                        std::to_string(i * 7)));
    Index index = Index::build(chunks, e);
    std::string dir = (fs::temp_directory_path() / "gridrag_idx").string();
    fs::remove_all(dir);
    index.persist(dir);
    Index loaded = Index::load(dir, e);
    CHECK(loaded.size() == index.size());

    for (const std::string& q : {"sales figure 7", "row 21", "figure"}) {
        auto a = index.hybrid_search(q, std::nullopt, {});
        auto b = loaded.hybrid_search(q, std::nullopt, {});
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].chunk->chunk_id == b[i].chunk->chunk_id);
            CHECK(std::abs(a[i].score - b[i].score) < 1e-9);
        }
    }

    // tampering with a persisted file is detected via checksums
    std::string catalog = dir + "/catalog.jsonl";
    std::string content = util::read_file(catalog);
    util::write_file(catalog, content + " ");
    CHECK_THROWS_AS(Index::load(dir, e), CorruptIndex);
    fs::remove_all(dir);
}
