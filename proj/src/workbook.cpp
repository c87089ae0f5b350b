#include "gridrag/workbook.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <sstream>

#include "gridrag/errors.hpp"
#include "gridrag/util/base64.hpp"
#include "gridrag/util/strings.hpp"
#include "json.hpp"

namespace gridrag {

using nlohmann::json;

std::string to_string(CellKind kind) {
    switch (kind) {
        case CellKind::empty: return "empty";
        case CellKind::text: return "text";
        case CellKind::number: return "number";
        case CellKind::boolean: return "boolean";
        case CellKind::datetime: return "datetime";
        case CellKind::formula: return "formula";
    }
    return "empty";
}

CellKind cell_kind_from_string(const std::string& s) {
    if (s == "empty") return CellKind::empty;
    if (s == "text") return CellKind::text;
    if (s == "number") return CellKind::number;
    if (s == "boolean") return CellKind::boolean;
    if (s == "datetime") return CellKind::datetime;
    if (s == "formula") return CellKind::formula;
    throw MalformedWorkbook("unknown cell kind: " + s);
}

CellValue CellValue::number(double v) {
    if (!std::isfinite(v)) throw MalformedWorkbook("non-finite number cell");
    std::ostringstream ss;
    ss.precision(15);
    ss << v;
    return {CellKind::number, ss.str(), v, {}};
}

CellValue CellValue::boolean(bool v) {
    return {CellKind::boolean, v ? "TRUE" : "FALSE", v ? 1.0 : 0.0, {}};
}

CellValue CellValue::datetime(std::string iso, double serial) {
    return {CellKind::datetime, std::move(iso), serial, {}};
}

CellValue CellValue::formula(std::string expr) {
    if (expr.empty() || expr[0] != '=') throw MalformedWorkbook("formula must start with '='");
    CellValue v;
    v.kind = CellKind::formula;
    v.raw = expr;
    v.formula_text = std::move(expr);
    return v;
}

const CellValue* Sheet::cell(int row, int col) const {
    auto it = cells.find({row, col});
    return it == cells.end() ? nullptr : &it->second;
}

void Sheet::set_cell(int row, int col, CellValue value) {
    if (row < 1 || col < 1) throw InvalidCoordinate(a1_ref(std::max(row, 1), std::max(col, 1)));
    if (value.is_empty()) {
        cells.erase({row, col});
    } else {
        cells[{row, col}] = std::move(value);
    }
    n_rows = 0;
    n_cols = 0;
    for (const auto& [rc, v] : cells) {
        n_rows = std::max(n_rows, rc.first);
        n_cols = std::max(n_cols, rc.second);
    }
    for (const auto& img : images) {
        n_rows = std::max(n_rows, img.row);
        n_cols = std::max(n_cols, img.col);
    }
}

const Sheet* Workbook::find_sheet(const std::string& name) const {
    for (const auto& s : sheets)
        if (s.name == name) return &s;
    return nullptr;
}

Sheet* Workbook::find_sheet(const std::string& name) {
    for (auto& s : sheets)
        if (s.name == name) return &s;
    return nullptr;
}

// --- A1 utilities ---

std::string a1_col(int col) {
    if (col < 1) throw InvalidCoordinate("column " + std::to_string(col));
    std::string out;
    while (col > 0) {
        int rem = (col - 1) % 26;
        out.push_back(char('A' + rem));
        col = (col - 1) / 26;
    }
    std::reverse(out.begin(), out.end());
    return out;
}

int a1_col_number(const std::string& text) {
    if (text.empty()) throw InvalidCoordinate("empty column");
    long long v = 0;
    for (char c : text) {
        if (c < 'A' || c > 'Z') throw InvalidCoordinate("column " + text);
        v = v * 26 + (c - 'A' + 1);
        if (v > 1'000'000'000LL) throw InvalidCoordinate("column " + text);
    }
    return int(v);
}

std::string a1_ref(int row, int col) {
    if (row < 1 || col < 1)
        throw InvalidCoordinate("(" + std::to_string(row) + "," + std::to_string(col) + ")");
    return a1_col(col) + std::to_string(row);
}

std::pair<int, int> parse_a1(const std::string& ref) {
    std::size_t i = 0;
    while (i < ref.size() && ref[i] >= 'A' && ref[i] <= 'Z') ++i;
    if (i == 0 || i == ref.size()) throw InvalidCoordinate(ref);
    for (std::size_t j = i; j < ref.size(); ++j)
        if (!std::isdigit(static_cast<unsigned char>(ref[j]))) throw InvalidCoordinate(ref);
    int col = a1_col_number(ref.substr(0, i));
    long long row = std::stoll(ref.substr(i));
    if (row < 1) throw InvalidCoordinate(ref);
    return {int(row), col};
}

A1Range parse_a1_range(const std::string& text) {
    A1Range r;
    auto colon = text.find(':');
    try {
        if (colon == std::string::npos) {
            auto [row, col] = parse_a1(text);
            r = {row, col, row, col};
        } else {
            auto [r1, c1] = parse_a1(text.substr(0, colon));
            auto [r2, c2] = parse_a1(text.substr(colon + 1));
            r = {std::min(r1, r2), std::min(c1, c2), std::max(r1, r2), std::max(c1, c2)};
        }
    } catch (const InvalidCoordinate&) {
        throw BadRange(text);
    }
    return r;
}

std::string a1_span(const A1Range& r) {
    return a1_ref(r.row1, r.col1) + ":" + a1_ref(r.row2, r.col2);
}

// --- validation ---

void validate_workbook(const Workbook& wb) {
    if (wb.workbook_id.empty()) throw MalformedWorkbook("missing workbook_id");
    if (wb.sheets.empty()) throw MalformedWorkbook("workbook has no sheets");
    std::set<std::string> names;
    for (const auto& sheet : wb.sheets) {
        if (sheet.name.empty()) throw MalformedWorkbook("empty sheet name");
        if (!names.insert(sheet.name).second)
            throw MalformedWorkbook("duplicate sheet name: " + sheet.name);
        for (const auto& [rc, value] : sheet.cells) {
            auto [row, col] = rc;
            if (row < 1 || col < 1 || row > sheet.n_rows || col > sheet.n_cols)
                throw MalformedWorkbook("cell out of bounds at " + sheet.name + "!" +
                                        a1_ref(std::max(row, 1), std::max(col, 1)));
            if (value.kind == CellKind::number &&
                (!value.numeric || !std::isfinite(*value.numeric)))
                throw MalformedWorkbook("number cell without finite numeric at " + sheet.name +
                                        "!" + a1_ref(row, col));
            if (value.kind == CellKind::formula &&
                (!value.formula_text || value.formula_text->empty() ||
                 (*value.formula_text)[0] != '='))
                throw MalformedWorkbook("formula cell without '=' text at " + sheet.name + "!" +
                                        a1_ref(row, col));
        }
        for (const auto& img : sheet.images) {
            if (img.payload.empty())
                throw MalformedWorkbook("image " + img.image_id + " has empty payload");
            if (img.row < 1 || img.col < 1 || img.row > sheet.n_rows || img.col > sheet.n_cols)
                throw MalformedWorkbook("image " + img.image_id + " anchored out of bounds");
        }
    }
}

// --- canonical format ---

static CellValue cell_from_json(const json& jc) {
    CellValue v;
    v.kind = cell_kind_from_string(jc.at("kind").get<std::string>());
    v.raw = jc.value("raw", std::string());
    if (jc.contains("numeric") && !jc["numeric"].is_null()) v.numeric = jc["numeric"].get<double>();
    if (jc.contains("formula_text") && !jc["formula_text"].is_null())
        v.formula_text = jc["formula_text"].get<std::string>();
    return v;
}

Workbook parse_canonical(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw MalformedWorkbook(std::string("invalid JSON: ") + e.what());
    }
    try {
        if (j.value("format_version", -1) != kCanonicalFormatVersion)
            throw IncompatibleVersion("canonical workbook format_version must be " +
                                      std::to_string(kCanonicalFormatVersion));
        Workbook wb;
        wb.workbook_id = j.at("workbook_id").get<std::string>();
        for (const auto& js : j.at("sheets")) {
            Sheet sheet;
            sheet.name = js.at("name").get<std::string>();
            for (const auto& jc : js.value("cells", json::array())) {
                int row = jc.at("row").get<int>();
                int col = jc.at("col").get<int>();
                if (row < 1 || col < 1)
                    throw MalformedWorkbook("non-positive cell coordinate in sheet " + sheet.name);
                if (sheet.cells.count({row, col}))
                    throw MalformedWorkbook("duplicate cell at " + sheet.name + "!" +
                                            a1_ref(row, col));
                CellValue v = cell_from_json(jc);
                if (!v.is_empty()) sheet.cells[{row, col}] = std::move(v);
            }
            for (const auto& ji : js.value("images", json::array())) {
                EmbeddedImage img;
                img.image_id = ji.at("image_id").get<std::string>();
                img.sheet = sheet.name;
                img.row = ji.at("row").get<int>();
                img.col = ji.at("col").get<int>();
                img.encoding = ji.value("encoding", std::string("image/png"));
                img.payload = util::base64_decode(ji.at("payload_base64").get<std::string>());
                img.alt_text = ji.value("alt_text", std::string());
                sheet.images.push_back(std::move(img));
            }
            for (const auto& [rc, v] : sheet.cells) {
                sheet.n_rows = std::max(sheet.n_rows, rc.first);
                sheet.n_cols = std::max(sheet.n_cols, rc.second);
            }
            for (const auto& img : sheet.images) {
                sheet.n_rows = std::max(sheet.n_rows, img.row);
                sheet.n_cols = std::max(sheet.n_cols, img.col);
            }
            wb.sheets.push_back(std::move(sheet));
        }
        validate_workbook(wb);
        return wb;
    } catch (const json::exception& e) {
        throw MalformedWorkbook(std::string("schema violation: ") + e.what());
    }
}

Workbook ingest_canonical(const std::string& path) {
    return parse_canonical(util::read_file(path));
}

std::string serialize_canonical(const Workbook& wb) {
    json j;
    j["format_version"] = kCanonicalFormatVersion;
    j["workbook_id"] = wb.workbook_id;
    j["sheets"] = json::array();
    for (const auto& sheet : wb.sheets) {
        json js;
        js["name"] = sheet.name;
        js["cells"] = json::array();
        for (const auto& [rc, v] : sheet.cells) {
            json jc;
            jc["row"] = rc.first;
            jc["col"] = rc.second;
            jc["kind"] = to_string(v.kind);
            jc["raw"] = v.raw;
            if (v.numeric) jc["numeric"] = *v.numeric;
            if (v.formula_text) jc["formula_text"] = *v.formula_text;
            js["cells"].push_back(std::move(jc));
        }
        js["images"] = json::array();
        for (const auto& img : sheet.images) {
            json ji;
            ji["image_id"] = img.image_id;
            ji["row"] = img.row;
            ji["col"] = img.col;
            ji["encoding"] = img.encoding;
            ji["payload_base64"] = util::base64_encode(img.payload);
            ji["alt_text"] = img.alt_text;
            js["images"].push_back(std::move(ji));
        }
        j["sheets"].push_back(std::move(js));
    }
    return j.dump(2) + "\n";
}

void write_canonical(const Workbook& wb, const std::string& path) {
    util::write_file_atomic(path, serialize_canonical(wb));
}

}  // namespace gridrag
