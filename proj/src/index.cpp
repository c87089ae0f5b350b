#include "gridrag/index.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <map>

#include "gridrag/chunk_json.hpp"
#include "gridrag/errors.hpp"
#include "gridrag/util/base64.hpp"
#include "gridrag/util/sha256.hpp"
#include "gridrag/util/strings.hpp"

namespace gridrag {

using nlohmann::json;

// --- chunk <-> json (catalog records, tool results, trace export) ---

json chunk_to_json(const Chunk& chunk, bool payload_as_digest) {
    json j;
    j["chunk_id"] = chunk.chunk_id;
    j["kind"] = to_string(chunk.kind);
    j["workbook_id"] = chunk.workbook_id;
    j["sheet"] = chunk.sheet;
    j["row_span"] = {chunk.row_span.first, chunk.row_span.second};
    j["col_span"] = {chunk.col_span.first, chunk.col_span.second};
    j["headers"] = chunk.headers;
    j["text"] = chunk.text;
    if (chunk.image) {
        json ji;
        ji["encoding"] = chunk.image->encoding;
        ji["alt_text"] = chunk.image->alt_text;
        if (payload_as_digest) {
            util::Sha256 h;
            h.update(chunk.image->payload.data(), chunk.image->payload.size());
            ji["payload_sha256"] = h.hex();
        } else {
            ji["payload_base64"] = util::base64_encode(chunk.image->payload);
        }
        j["image"] = std::move(ji);
    }
    return j;
}

Chunk chunk_from_json(const json& j) {
    Chunk c;
    c.chunk_id = j.at("chunk_id").get<std::string>();
    c.kind = chunk_kind_from_string(j.at("kind").get<std::string>());
    c.workbook_id = j.at("workbook_id").get<std::string>();
    c.sheet = j.at("sheet").get<std::string>();
    c.row_span = {j.at("row_span")[0].get<int>(), j.at("row_span")[1].get<int>()};
    c.col_span = {j.at("col_span")[0].get<int>(), j.at("col_span")[1].get<int>()};
    c.headers = j.at("headers").get<std::vector<std::string>>();
    c.text = j.at("text").get<std::string>();
    if (j.contains("image")) {
        const auto& ji = j["image"];
        ChunkImage img;
        img.encoding = ji.value("encoding", std::string());
        img.alt_text = ji.value("alt_text", std::string());
        img.payload = util::base64_decode(ji.at("payload_base64").get<std::string>());
        c.image = std::move(img);
    }
    return c;
}

// --- mock embedder ---

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

std::uint64_t fnv1a(const char* p, std::size_t n) {
    std::uint64_t h = kFnvOffset;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= std::uint8_t(p[i]);
        h *= kFnvPrime;
    }
    return h;
}

EmbeddingVector trigram_embed(const std::string& input, int dim) {
    std::string text = util::to_lower(input);
    std::vector<float> v(std::size_t(dim), 0.0f);
    auto add = [&](const char* p, std::size_t n) {
        std::uint64_t h = fnv1a(p, n);
        std::size_t bucket = std::size_t(h % std::uint64_t(dim));
        float sign = ((h >> 6) & 1) ? 1.0f : -1.0f;
        v[bucket] += sign;
    };
    if (text.size() < 3) {
        if (!text.empty()) add(text.data(), text.size());
    } else {
        for (std::size_t i = 0; i + 3 <= text.size(); ++i) add(text.data() + i, 3);
    }
    double norm = 0.0;
    for (float x : v) norm += double(x) * x;
    norm = std::sqrt(norm);
    if (norm > 0.0)
        for (float& x : v) x = float(x / norm);
    return {std::move(v)};
}

}  // namespace

EmbeddingVector MockEmbedder::embed_text(const std::string& text) {
    return trigram_embed(text, dimension());
}

EmbeddingVector MockEmbedder::embed_image(const std::vector<std::uint8_t>&,
                                          const std::string& alt_text) {
    return trigram_embed(alt_text, dimension());
}

std::unique_ptr<Embedder> make_embedder(const std::string& name) {
    if (name == "mock") return std::make_unique<MockEmbedder>();
    throw Error("unknown embedder '" + name + "' (only 'mock' ships; live providers are adapters)");
}

// --- fusion ---

FusedResult rrf_fuse(const std::vector<RankedList>& lists, const FusionConfig& config) {
    if (config.k < 1 || config.top_k < 1) throw Error("fusion config: k and top_k must be >= 1");
    std::map<std::string, FusedEntry> acc;  // ordered: deterministic tie-break by id
    for (const auto& list : lists) {
        for (std::size_t i = 0; i < list.entries.size(); ++i) {
            int rank = int(i) + 1;
            auto& e = acc[list.entries[i].chunk_id];
            e.chunk_id = list.entries[i].chunk_id;
            e.rrf_score += 1.0 / (config.k + rank);
            e.contributing.emplace_back(list.source, rank);
        }
    }
    FusedResult out;
    out.entries.reserve(acc.size());
    for (auto& [id, e] : acc) out.entries.push_back(std::move(e));
    std::stable_sort(out.entries.begin(), out.entries.end(),
                     [](const FusedEntry& a, const FusedEntry& b) {
                         if (a.rrf_score != b.rrf_score) return a.rrf_score > b.rrf_score;
                         return a.chunk_id < b.chunk_id;
                     });
    if (int(out.entries.size()) > config.top_k) out.entries.resize(std::size_t(config.top_k));
    return out;
}

// --- build ---

Index Index::build(const std::vector<Chunk>& chunks, Embedder& embedder) {
    Index idx;
    idx.chunks_ = chunks;
    std::sort(idx.chunks_.begin(), idx.chunks_.end(),
              [](const Chunk& a, const Chunk& b) { return a.chunk_id < b.chunk_id; });
    for (std::size_t i = 0; i < idx.chunks_.size(); ++i) {
        if (!idx.by_id_.emplace(idx.chunks_[i].chunk_id, i).second)
            throw DuplicateChunkId(idx.chunks_[i].chunk_id);
    }
    idx.attach(embedder);
    idx.vectors_.reserve(idx.chunks_.size());
    for (const auto& chunk : idx.chunks_) {
        EmbeddingVector v = chunk.kind == ChunkKind::image
                                ? embedder.embed_image(chunk.image->payload, chunk.text)
                                : embedder.embed_text(chunk.text);
        if (int(v.values.size()) != idx.dim_)
            throw EmbedderFailure(chunk.chunk_id, "dimension mismatch");
        double norm = 0.0;
        bool finite = true;
        for (float x : v.values) {
            if (!std::isfinite(x)) finite = false;
            norm += double(x) * x;
        }
        if (!finite || norm <= 0.0)
            throw EmbedderFailure(chunk.chunk_id,
                                  "embedding violates norm invariant (zero or non-finite); " +
                                      std::to_string(idx.vectors_.size()) + " chunks embedded");
        idx.vectors_.push_back(std::move(v.values));
    }
    idx.build_lexical();
    return idx;
}

void Index::attach(Embedder& embedder) {
    embedder_ = &embedder;
    embedder_id_ = embedder.id();
    dim_ = embedder.dimension();
}

void Index::build_lexical() {
    postings_.clear();
    doc_len_.assign(chunks_.size(), 0);
    std::uint64_t total_len = 0;
    for (std::size_t doc = 0; doc < chunks_.size(); ++doc) {
        auto tokens = util::tokenize(chunks_[doc].text);
        doc_len_[doc] = std::uint32_t(tokens.size());
        total_len += tokens.size();
        std::map<std::string, std::uint32_t> tf;
        for (auto& t : tokens) ++tf[t];
        for (auto& [term, count] : tf)
            postings_[term].emplace_back(std::uint32_t(doc), count);
    }
    avg_doc_len_ = chunks_.empty() ? 0.0 : double(total_len) / double(chunks_.size());
}

// --- search ---

namespace {

RankedList take_top(std::string source, std::vector<RankedEntry> scored, int k) {
    std::stable_sort(scored.begin(), scored.end(), [](const RankedEntry& a, const RankedEntry& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.chunk_id < b.chunk_id;
    });
    if (k >= 0 && int(scored.size()) > k) scored.resize(std::size_t(k));
    return {std::move(source), std::move(scored)};
}

}  // namespace

RankedList Index::dense_search(const std::string& query, std::optional<ChunkKind> kind_filter,
                               const CoordFilter& coord_filter, int k) const {
    std::string source = kind_filter ? "dense:" + to_string(*kind_filter) : "dense";
    if (query.empty() || chunks_.empty() || !embedder_) return {source, {}};
    EmbeddingVector q = embedder_->embed_text(query);
    std::vector<RankedEntry> scored;
    for (std::size_t i = 0; i < chunks_.size(); ++i) {
        const Chunk& c = chunks_[i];
        if (kind_filter && c.kind != *kind_filter) continue;
        if (!coord_filter.matches(c)) continue;
        double dot = 0.0;
        for (std::size_t d = 0; d < q.values.size(); ++d)
            dot += double(q.values[d]) * vectors_[i][d];
        scored.push_back({c.chunk_id, dot});
    }
    return take_top(std::move(source), std::move(scored), k);
}

RankedList Index::lexical_search(const std::string& query, std::optional<ChunkKind> kind_filter,
                                 const CoordFilter& coord_filter, int k) const {
    constexpr double k1 = 1.2, b = 0.75;
    std::string source = kind_filter ? "lexical:" + to_string(*kind_filter) : "lexical";
    auto terms = util::tokenize(query);
    if (terms.empty() || chunks_.empty()) return {source, {}};
    std::sort(terms.begin(), terms.end());
    terms.erase(std::unique(terms.begin(), terms.end()), terms.end());

    const double n_docs = double(chunks_.size());
    std::map<std::uint32_t, double> scores;
    for (const auto& term : terms) {
        auto it = postings_.find(term);
        if (it == postings_.end()) continue;
        double df = double(it->second.size());
        double idf = std::log((n_docs - df + 0.5) / (df + 0.5) + 1.0);
        for (const auto& [doc, tf] : it->second) {
            double dl = doc_len_[doc];
            double denom = tf + k1 * (1.0 - b + b * dl / (avg_doc_len_ > 0 ? avg_doc_len_ : 1.0));
            scores[doc] += idf * (tf * (k1 + 1.0)) / denom;
        }
    }
    std::vector<RankedEntry> scored;
    for (const auto& [doc, score] : scores) {
        const Chunk& c = chunks_[doc];
        if (kind_filter && c.kind != *kind_filter) continue;
        if (!coord_filter.matches(c)) continue;
        scored.push_back({c.chunk_id, score});
    }
    return take_top(std::move(source), std::move(scored), k);
}

std::vector<SearchHit> Index::hybrid_search(const std::string& query,
                                            std::optional<ChunkKind> kind_filter,
                                            const CoordFilter& coord_filter,
                                            const FusionConfig& config) const {
    static constexpr ChunkKind kAllKinds[] = {ChunkKind::row, ChunkKind::column, ChunkKind::window,
                                              ChunkKind::image};
    std::vector<RankedList> lists;
    for (ChunkKind kind : kAllKinds) {
        if (kind_filter && kind != *kind_filter) continue;
        RankedList dense = dense_search(query, kind, coord_filter, config.top_k);
        if (!dense.entries.empty()) lists.push_back(std::move(dense));
        RankedList lexical = lexical_search(query, kind, coord_filter, config.top_k);
        if (!lexical.entries.empty()) lists.push_back(std::move(lexical));
    }
    FusedResult fused = rrf_fuse(lists, config);
    std::vector<SearchHit> hits;
    hits.reserve(fused.entries.size());
    for (const auto& e : fused.entries) hits.push_back({find_chunk(e.chunk_id), e.rrf_score});
    return hits;
}

const Chunk* Index::find_chunk(const std::string& chunk_id) const {
    auto it = by_id_.find(chunk_id);
    return it == by_id_.end() ? nullptr : &chunks_[it->second];
}

// --- persistence ---
// Directory layout: manifest.json, catalog.jsonl, vectors.bin (LE float32
// row-major), postings.json. SHA-256 checksums in the manifest.

namespace {

std::string file_checksum(const std::string& path) {
    return util::Sha256::hex_of(util::read_file(path));
}

}  // namespace

void Index::persist(const std::string& dir) const {
    namespace fs = std::filesystem;
    fs::create_directories(dir);

    std::string catalog;
    for (const auto& chunk : chunks_) catalog += chunk_to_json(chunk).dump() + "\n";
    util::write_file_atomic(dir + "/catalog.jsonl", catalog);

    std::string vectors;
    vectors.reserve(chunks_.size() * std::size_t(dim_) * 4);
    for (const auto& row : vectors_) {
        static_assert(sizeof(float) == 4);
        vectors.append(reinterpret_cast<const char*>(row.data()), row.size() * 4);
    }
    util::write_file_atomic(dir + "/vectors.bin", vectors);

    json jpost;
    jpost["doc_len"] = doc_len_;
    jpost["avg_doc_len"] = avg_doc_len_;
    json terms = json::object();
    for (const auto& [term, plist] : postings_) {
        json arr = json::array();
        for (const auto& [doc, tf] : plist) arr.push_back({doc, tf});
        terms[term] = std::move(arr);
    }
    jpost["terms"] = std::move(terms);
    util::write_file_atomic(dir + "/postings.json", jpost.dump());

    json manifest;
    manifest["format_version"] = kIndexFormatVersion;
    manifest["embedder_id"] = embedder_id_;
    manifest["dimension"] = dim_;
    manifest["n_chunks"] = chunks_.size();
    manifest["checksums"] = {{"catalog.jsonl", file_checksum(dir + "/catalog.jsonl")},
                             {"vectors.bin", file_checksum(dir + "/vectors.bin")},
                             {"postings.json", file_checksum(dir + "/postings.json")}};
    util::write_file_atomic(dir + "/manifest.json", manifest.dump(2) + "\n");
}

Index Index::load(const std::string& dir, Embedder& embedder) {
    json manifest;
    try {
        manifest = json::parse(util::read_file(dir + "/manifest.json"));
    } catch (const json::exception& e) {
        throw CorruptIndex(std::string("manifest: ") + e.what());
    }
    if (manifest.value("format_version", -1) != kIndexFormatVersion)
        throw IncompatibleVersion("index format_version " +
                                  manifest.value("format_version", json()).dump());
    if (manifest.value("embedder_id", std::string()) != embedder.id())
        throw IncompatibleVersion("index built with embedder '" +
                                  manifest.value("embedder_id", std::string()) +
                                  "', loading with '" + embedder.id() + "'");
    for (const auto& [file, sum] : manifest.at("checksums").items()) {
        if (file_checksum(dir + "/" + file) != sum.get<std::string>())
            throw CorruptIndex("checksum mismatch for " + file);
    }

    Index idx;
    idx.attach(embedder);
    std::string catalog = util::read_file(dir + "/catalog.jsonl");
    std::size_t pos = 0;
    while (pos < catalog.size()) {
        auto nl = catalog.find('\n', pos);
        if (nl == std::string::npos) nl = catalog.size();
        std::string line = catalog.substr(pos, nl - pos);
        pos = nl + 1;
        if (line.empty()) continue;
        try {
            idx.chunks_.push_back(chunk_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw CorruptIndex(std::string("catalog record: ") + e.what());
        }
    }
    if (idx.chunks_.size() != manifest.value("n_chunks", std::size_t(0)))
        throw CorruptIndex("catalog record count mismatch");
    for (std::size_t i = 0; i < idx.chunks_.size(); ++i)
        idx.by_id_.emplace(idx.chunks_[i].chunk_id, i);

    std::string vectors = util::read_file(dir + "/vectors.bin");
    if (vectors.size() != idx.chunks_.size() * std::size_t(idx.dim_) * 4)
        throw CorruptIndex("vectors.bin size mismatch");
    idx.vectors_.resize(idx.chunks_.size(), std::vector<float>(std::size_t(idx.dim_)));
    for (std::size_t i = 0; i < idx.chunks_.size(); ++i)
        std::memcpy(idx.vectors_[i].data(), vectors.data() + i * std::size_t(idx.dim_) * 4,
                    std::size_t(idx.dim_) * 4);

    try {
        json jpost = json::parse(util::read_file(dir + "/postings.json"));
        idx.doc_len_ = jpost.at("doc_len").get<std::vector<std::uint32_t>>();
        idx.avg_doc_len_ = jpost.at("avg_doc_len").get<double>();
        for (const auto& [term, arr] : jpost.at("terms").items()) {
            auto& plist = idx.postings_[term];
            for (const auto& pair : arr)
                plist.emplace_back(pair[0].get<std::uint32_t>(), pair[1].get<std::uint32_t>());
        }
    } catch (const json::exception& e) {
        throw CorruptIndex(std::string("postings: ") + e.what());
    }
    if (idx.doc_len_.size() != idx.chunks_.size()) throw CorruptIndex("doc_len size mismatch");
    return idx;
}

}  // namespace gridrag
