#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace gridrag {

enum class CellKind { empty, text, number, boolean, datetime, formula };

std::string to_string(CellKind kind);
CellKind cell_kind_from_string(const std::string& s);

struct CellValue {
    CellKind kind = CellKind::empty;
    std::string raw;
    std::optional<double> numeric;
    std::optional<std::string> formula_text;  // present iff kind == formula

    bool operator==(const CellValue&) const = default;

    static CellValue empty() { return {}; }
    static CellValue text(std::string s) { return {CellKind::text, std::move(s), {}, {}}; }
    static CellValue number(double v);
    static CellValue boolean(bool v);
    static CellValue datetime(std::string iso, double serial);
    static CellValue formula(std::string expr);  // expr must start with '='

    bool is_empty() const { return kind == CellKind::empty; }
};

struct EmbeddedImage {
    std::string image_id;
    std::string sheet;  // anchor
    int row = 0;
    int col = 0;
    std::vector<std::uint8_t> payload;
    std::string encoding;  // media type, e.g. "image/png"
    std::string alt_text;

    bool operator==(const EmbeddedImage&) const = default;
};

struct Sheet {
    std::string name;
    // Sparse grid, 1-based (row, col). std::map keeps deterministic row-major order.
    std::map<std::pair<int, int>, CellValue> cells;
    int n_rows = 0;  // bounding box over non-empty cells and image anchors
    int n_cols = 0;
    std::vector<EmbeddedImage> images;

    const CellValue* cell(int row, int col) const;
    void set_cell(int row, int col, CellValue value);  // updates the bounding box

    bool operator==(const Sheet&) const = default;
};

struct Workbook {
    std::string workbook_id;
    std::vector<Sheet> sheets;

    const Sheet* find_sheet(const std::string& name) const;
    Sheet* find_sheet(const std::string& name);

    bool operator==(const Workbook&) const = default;
};

// --- A1 coordinate utilities (bijective base-26 columns) ---

std::string a1_col(int col);                 // 1 -> "A", 27 -> "AA"
int a1_col_number(const std::string& text);  // inverse of a1_col
std::string a1_ref(int row, int col);        // (3,27) -> "AA3"
std::pair<int, int> parse_a1(const std::string& ref);  // -> (row, col)

struct A1Range {
    int row1 = 0, col1 = 0, row2 = 0, col2 = 0;  // inclusive, normalized
};
A1Range parse_a1_range(const std::string& text);  // "A1:B2" or single cell "A1"
std::string a1_span(const A1Range& r);

// --- Canonical workbook format (format_version 1, JSON, UTF-8) ---

constexpr int kCanonicalFormatVersion = 1;

Workbook ingest_canonical(const std::string& path);
Workbook parse_canonical(const std::string& json_text);
std::string serialize_canonical(const Workbook& wb);
void write_canonical(const Workbook& wb, const std::string& path);

// Enforces all Workbook/Sheet/CellValue invariants; throws MalformedWorkbook.
void validate_workbook(const Workbook& wb);

// --- XLSX (OOXML) best-effort adapter ---

struct XlsxIngest {
    Workbook workbook;
    std::vector<std::string> dropped;  // unsupported features noted, not fatal
};

XlsxIngest ingest_xlsx(const std::string& path);
void write_xlsx(const Workbook& wb, const std::string& path);

}  // namespace gridrag
