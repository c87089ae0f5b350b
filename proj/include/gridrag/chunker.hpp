#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gridrag/workbook.hpp"

namespace gridrag {

enum class ChunkKind { row, column, window, image };

std::string to_string(ChunkKind kind);
ChunkKind chunk_kind_from_string(const std::string& s);

struct ChunkImage {
    std::vector<std::uint8_t> payload;
    std::string encoding;
    std::string alt_text;

    bool operator==(const ChunkImage&) const = default;
};

// One retrievable unit: a row, column, rectangular window or embedded image,
// with full provenance (workbook, sheet, spans) and a deterministic text
// serialization used by both the lexical and the dense retriever.
struct Chunk {
    std::string chunk_id;  // workbook_id/sheet/kind/coords, deterministic
    ChunkKind kind = ChunkKind::row;
    std::string workbook_id;
    std::string sheet;
    std::pair<int, int> row_span{0, 0};  // inclusive, 1-based
    std::pair<int, int> col_span{0, 0};
    std::vector<std::string> headers;
    std::string text;
    std::optional<ChunkImage> image;  // present iff kind == image

    bool operator==(const Chunk&) const = default;
};

struct ChunkConfig {
    int window_rows = 16;
    int window_cols = 8;
    int window_stride_rows = 8;  // 50% overlap by default
    int window_stride_cols = 4;
    int header_row_count = 1;
    int max_cells_per_chunk = 4096;

    void validate() const;  // throws Error on non-positive fields / stride > window
};

// Column headers for a sheet: first header_row_count rows, falling back to
// A1 column letters when the candidate header row is numeric-only or blank.
std::vector<std::string> sheet_headers(const Sheet& sheet, int header_row_count);

// Deterministic rendering "sheet=<name> <kind>=<span> | <header>=<value> | ..."
// over non-empty cells in row-major order. Truncates at max_cells with a marker.
std::string serialize_chunk_text(const Sheet& sheet, ChunkKind kind, const A1Range& span,
                                 const std::vector<std::string>& col_headers, int max_cells);

std::vector<Chunk> chunk_workbook(const Workbook& workbook, const ChunkConfig& config = {});

}  // namespace gridrag
