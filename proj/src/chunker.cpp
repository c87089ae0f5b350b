#include "gridrag/chunker.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "gridrag/errors.hpp"
#include "gridrag/util/strings.hpp"

namespace gridrag {

std::string to_string(ChunkKind kind) {
    switch (kind) {
        case ChunkKind::row: return "row";
        case ChunkKind::column: return "column";
        case ChunkKind::window: return "window";
        case ChunkKind::image: return "image";
    }
    return "row";
}

ChunkKind chunk_kind_from_string(const std::string& s) {
    if (s == "row") return ChunkKind::row;
    if (s == "column") return ChunkKind::column;
    if (s == "window") return ChunkKind::window;
    if (s == "image") return ChunkKind::image;
    throw Error("unknown chunk kind: " + s);
}

void ChunkConfig::validate() const {
    if (window_rows < 1 || window_cols < 1 || window_stride_rows < 1 || window_stride_cols < 1 ||
        header_row_count < 1 || max_cells_per_chunk < 1)
        throw Error("chunk config fields must be positive");
    if (window_stride_rows > window_rows || window_stride_cols > window_cols)
        throw Error("chunk config stride exceeds window size (coverage would have gaps)");
}

std::vector<std::string> sheet_headers(const Sheet& sheet, int header_row_count) {
    std::vector<std::string> headers(std::size_t(std::max(sheet.n_cols, 0)));
    bool any_textual = false;
    for (int row = 1; row <= header_row_count; ++row) {
        for (int col = 1; col <= sheet.n_cols; ++col) {
            const CellValue* v = sheet.cell(row, col);
            if (v && !v->is_empty() && v->kind != CellKind::number) any_textual = true;
        }
    }
    for (int col = 1; col <= sheet.n_cols; ++col) {
        std::string h;
        if (any_textual) {
            for (int row = 1; row <= header_row_count; ++row) {
                const CellValue* v = sheet.cell(row, col);
                if (v && !v->is_empty()) {
                    if (!h.empty()) h += " ";
                    h += v->raw;
                }
            }
        }
        headers[std::size_t(col - 1)] = h.empty() ? a1_col(col) : h;
    }
    return headers;
}

std::string serialize_chunk_text(const Sheet& sheet, ChunkKind kind, const A1Range& span,
                                 const std::vector<std::string>& col_headers, int max_cells) {
    std::string out = "sheet=" + sheet.name + " " + to_string(kind) + "=" + a1_span(span);
    int emitted = 0;
    bool truncated = false;
    for (int row = span.row1; row <= span.row2 && !truncated; ++row) {
        for (int col = span.col1; col <= span.col2; ++col) {
            const CellValue* v = sheet.cell(row, col);
            if (!v || v->is_empty()) continue;
            if (emitted >= max_cells) {
                truncated = true;
                break;
            }
            const std::string& header = col <= int(col_headers.size()) && col >= 1
                                            ? col_headers[std::size_t(col - 1)]
                                            : a1_col(col);
            out += " | " + header + "=" + v->raw;
            ++emitted;
        }
    }
    if (emitted == 0) return "";  // all-empty span: chunk suppressed upstream
    if (truncated) out += " | \xE2\x80\xA6[truncated]";
    return out;
}

namespace {

std::string escape_id_part(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '/') out += "%2F";
        else out.push_back(c);
    }
    return out;
}

}  // namespace

std::vector<Chunk> chunk_workbook(const Workbook& workbook, const ChunkConfig& config) {
    config.validate();
    std::vector<Chunk> chunks;
    for (const auto& sheet : workbook.sheets) {
        if (sheet.n_rows == 0 || sheet.n_cols == 0) {
            // image-only sheets cannot occur (anchors extend the bounding box)
            continue;
        }
        const std::string id_base =
            workbook.workbook_id + "/" + escape_id_part(sheet.name) + "/";
        auto headers = sheet_headers(sheet, config.header_row_count);

        // per-row / per-column occupancy
        std::set<int> live_rows, live_cols;
        std::map<int, int> row_counts, col_counts;
        for (const auto& [rc, v] : sheet.cells) {
            live_rows.insert(rc.first);
            live_cols.insert(rc.second);
            ++row_counts[rc.first];
            ++col_counts[rc.second];
        }

        for (int row : live_rows) {
            if (row_counts[row] > config.max_cells_per_chunk)
                throw ChunkTooLarge("row " + std::to_string(row) + " of sheet " + sheet.name +
                                    " has " + std::to_string(row_counts[row]) + " cells");
            A1Range span{row, 1, row, sheet.n_cols};
            Chunk c;
            c.chunk_id = id_base + "row/r" + std::to_string(row);
            c.kind = ChunkKind::row;
            c.workbook_id = workbook.workbook_id;
            c.sheet = sheet.name;
            c.row_span = {row, row};
            c.col_span = {1, sheet.n_cols};
            c.headers = headers;
            c.text = serialize_chunk_text(sheet, ChunkKind::row, span, headers,
                                          config.max_cells_per_chunk);
            chunks.push_back(std::move(c));
        }

        for (int col : live_cols) {
            if (col_counts[col] > config.max_cells_per_chunk)
                throw ChunkTooLarge("column " + a1_col(col) + " of sheet " + sheet.name + " has " +
                                    std::to_string(col_counts[col]) + " cells");
            A1Range span{1, col, sheet.n_rows, col};
            Chunk c;
            c.chunk_id = id_base + "col/c" + std::to_string(col);
            c.kind = ChunkKind::column;
            c.workbook_id = workbook.workbook_id;
            c.sheet = sheet.name;
            c.row_span = {1, sheet.n_rows};
            c.col_span = {col, col};
            c.headers = {headers[std::size_t(col - 1)]};
            c.text = serialize_chunk_text(sheet, ChunkKind::column, span, headers,
                                          config.max_cells_per_chunk);
            chunks.push_back(std::move(c));
        }

        // overlapping window tiling of the bounding box
        for (int r0 = 1;; r0 += config.window_stride_rows) {
            int r1 = std::min(r0 + config.window_rows - 1, sheet.n_rows);
            for (int c0 = 1;; c0 += config.window_stride_cols) {
                int c1 = std::min(c0 + config.window_cols - 1, sheet.n_cols);
                A1Range span{r0, c0, r1, c1};
                std::string text = serialize_chunk_text(sheet, ChunkKind::window, span, headers,
                                                        config.max_cells_per_chunk);
                if (!text.empty()) {
                    Chunk c;
                    c.chunk_id = id_base + "win/r" + std::to_string(r0) + "-" +
                                 std::to_string(r1) + "c" + std::to_string(c0) + "-" +
                                 std::to_string(c1);
                    c.kind = ChunkKind::window;
                    c.workbook_id = workbook.workbook_id;
                    c.sheet = sheet.name;
                    c.row_span = {r0, r1};
                    c.col_span = {c0, c1};
                    c.headers = headers;
                    c.text = std::move(text);
                    chunks.push_back(std::move(c));
                }
                if (c1 >= sheet.n_cols) break;
            }
            if (r1 >= sheet.n_rows) break;
        }

        for (const auto& img : sheet.images) {
            Chunk c;
            c.chunk_id = id_base + "img/" + escape_id_part(img.image_id);
            c.kind = ChunkKind::image;
            c.workbook_id = workbook.workbook_id;
            c.sheet = sheet.name;
            c.row_span = {img.row, img.row};
            c.col_span = {img.col, img.col};
            // alt text plus a caption line so BM25 has a lexical surface
            std::string caption = "image at " + sheet.name + "!" + a1_ref(img.row, img.col);
            c.text = img.alt_text.empty() ? caption : img.alt_text + "\n" + caption;
            c.image = ChunkImage{img.payload, img.encoding, img.alt_text};
            chunks.push_back(std::move(c));
        }
    }

    std::sort(chunks.begin(), chunks.end(),
              [](const Chunk& a, const Chunk& b) { return a.chunk_id < b.chunk_id; });
    for (std::size_t i = 1; i < chunks.size(); ++i)
        if (chunks[i].chunk_id == chunks[i - 1].chunk_id)
            throw DuplicateChunkId(chunks[i].chunk_id);
    return chunks;
}

}  // namespace gridrag
