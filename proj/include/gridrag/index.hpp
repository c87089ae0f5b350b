#pragma once

#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "gridrag/chunker.hpp"

namespace gridrag {

struct EmbeddingVector {
    std::vector<float> values;  // unit-normalized on construction
};

// Provider abstraction over the embedding model. The mock provider is fully
// deterministic; live providers are drop-in adapters behind this interface.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual EmbeddingVector embed_text(const std::string& text) = 0;
    virtual EmbeddingVector embed_image(const std::vector<std::uint8_t>& payload,
                                        const std::string& alt_text) = 0;
    virtual int dimension() const = 0;
    virtual std::string id() const = 0;
};

// Offline deterministic embedder: character trigrams hashed into D=64 signed
// buckets, L2-normalized. Images embed through their alt text + caption line.
class MockEmbedder : public Embedder {
public:
    EmbeddingVector embed_text(const std::string& text) override;
    EmbeddingVector embed_image(const std::vector<std::uint8_t>& payload,
                                const std::string& alt_text) override;
    int dimension() const override { return 64; }
    std::string id() const override { return "mock-trigram-64"; }
};

// Throws Error for unknown provider names (live providers are adapters).
std::unique_ptr<Embedder> make_embedder(const std::string& name);

struct RankedEntry {
    std::string chunk_id;
    double score;
};

struct RankedList {
    std::string source;  // retriever id x chunk kind, e.g. "dense:row"
    std::vector<RankedEntry> entries;  // scores non-increasing, ids unique
};

struct FusedEntry {
    std::string chunk_id;
    double rrf_score;
    std::vector<std::pair<std::string, int>> contributing;  // (source, 1-based rank)
};

struct FusedResult {
    std::vector<FusedEntry> entries;  // non-increasing score, ties by chunk_id asc
};

struct FusionConfig {
    int k = 60;      // rank smoothing constant
    int top_k = 10;  // fused results kept
};

// score(c) = sum over lists containing c of 1 / (k + rank), rank 1-based.
FusedResult rrf_fuse(const std::vector<RankedList>& lists, const FusionConfig& config = {});

struct CoordFilter {
    std::optional<int> row;
    std::optional<int> col;

    bool matches(const Chunk& c) const {
        if (row && (*row < c.row_span.first || *row > c.row_span.second)) return false;
        if (col && (*col < c.col_span.first || *col > c.col_span.second)) return false;
        return true;
    }
};

struct SearchHit {
    const Chunk* chunk;
    double score;
};

constexpr int kIndexFormatVersion = 1;

// Immutable after build; concurrent queries are safe.
class Index {
public:
    Index() = default;

    static Index build(const std::vector<Chunk>& chunks, Embedder& embedder);

    RankedList dense_search(const std::string& query, std::optional<ChunkKind> kind_filter,
                            const CoordFilter& coord_filter, int k) const;
    RankedList lexical_search(const std::string& query, std::optional<ChunkKind> kind_filter,
                              const CoordFilter& coord_filter, int k) const;

    // One ranked list per (retriever, kind) pair, fused once; the single entry
    // point the agent search tools wrap.
    std::vector<SearchHit> hybrid_search(const std::string& query,
                                         std::optional<ChunkKind> kind_filter,
                                         const CoordFilter& coord_filter,
                                         const FusionConfig& config = {}) const;

    const Chunk* find_chunk(const std::string& chunk_id) const;
    const std::vector<Chunk>& chunks() const { return chunks_; }
    std::size_t size() const { return chunks_.size(); }
    const std::string& embedder_id() const { return embedder_id_; }

    void persist(const std::string& dir) const;
    static Index load(const std::string& dir, Embedder& embedder);

private:
    Embedder* embedder_ = nullptr;
    std::string embedder_id_;
    int dim_ = 0;

    std::vector<Chunk> chunks_;  // sorted by chunk_id
    std::unordered_map<std::string, std::size_t> by_id_;
    std::vector<std::vector<float>> vectors_;  // aligned with chunks_

    // Okapi BM25 inverted index (k1=1.2, b=0.75)
    std::unordered_map<std::string, std::vector<std::pair<std::uint32_t, std::uint32_t>>>
        postings_;  // term -> [(doc index, tf)]
    std::vector<std::uint32_t> doc_len_;
    double avg_doc_len_ = 0.0;

    void build_lexical();
    void attach(Embedder& embedder);
};

}  // namespace gridrag
