#include "gridrag/executors.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>

#include "gridrag/errors.hpp"
#include "gridrag/util/strings.hpp"
#include "json.hpp"

namespace gridrag {

namespace fs = std::filesystem;
using nlohmann::json;

std::string ValidationReport::render() const {
    std::ostringstream out;
    out << check_name << ": " << (passed ? "PASS" : "FAIL") << " lhs=" << lhs << " rhs=" << rhs
        << " tolerance=" << tolerance << " |delta|=" << std::fabs(lhs - rhs);
    if (!locations.empty()) {
        out << " cells=";
        for (std::size_t i = 0; i < locations.size(); ++i)
            out << (i ? "," : "") << locations[i];
    }
    return out.str();
}

// --- workbook loading / writing ---

static std::string companion_canonical_path(const std::string& xlsx_path) {
    return xlsx_path.substr(0, xlsx_path.size() - 5) + ".wb.json";
}

Workbook load_workbook_auto(const std::string& path) {
    if (util::ends_with(path, ".xlsx")) {
        std::string companion = companion_canonical_path(path);
        if (fs::exists(companion)) return ingest_canonical(companion);
        if (!fs::exists(path)) throw FileNotFound(path);
        return ingest_xlsx(path).workbook;
    }
    return ingest_canonical(path);
}

// Advisory single-writer lock per workbook path.
class FileLock {
public:
    explicit FileLock(const std::string& target) : path_(target + ".lock") {
        fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd_ < 0) throw WriteConflict(target);
    }
    ~FileLock() {
        if (fd_ >= 0) {
            ::close(fd_);
            ::unlink(path_.c_str());
        }
    }
    FileLock(const FileLock&) = delete;
    FileLock& operator=(const FileLock&) = delete;

private:
    std::string path_;
    int fd_ = -1;
};

std::vector<std::string> evaluate_workbook(Workbook& wb) {
    std::vector<std::string> failures;
    for (auto& sheet : wb.sheets) {
        enum class State { fresh, visiting, done };
        std::map<std::pair<int, int>, State> states;

        std::function<CellValue(int, int)> resolve = [&](int row, int col) -> CellValue {
            const CellValue* cell = sheet.cell(row, col);
            if (!cell) return CellValue::empty();
            if (cell->kind != CellKind::formula) return *cell;
            auto key = std::make_pair(row, col);
            State& st = states[key];
            if (st == State::visiting) throw CycleDetected(sheet.name + "!" + a1_ref(row, col));
            if (st == State::done) return *cell;
            st = State::visiting;
            CellValue& mut = sheet.cells.at(key);
            try {
                CellValue evaluated = eval_formula(*mut.formula_text, resolve);
                mut.numeric = evaluated.numeric;
                mut.raw = evaluated.raw;
            } catch (const CycleDetected&) {
                states[key] = State::done;
                mut.numeric.reset();
                mut.raw = "#CYCLE!";
                failures.push_back(sheet.name + "!" + a1_ref(row, col) + ": reference cycle");
                return mut;
            } catch (const Error& e) {
                states[key] = State::done;
                mut.numeric.reset();
                mut.raw = "#EVAL!";
                failures.push_back(sheet.name + "!" + a1_ref(row, col) + ": " + e.what());
                return mut;
            }
            states[key] = State::done;
            return mut;
        };

        std::vector<std::pair<int, int>> formula_cells;
        for (const auto& [rc, v] : sheet.cells)
            if (v.kind == CellKind::formula) formula_cells.push_back(rc);
        for (auto [row, col] : formula_cells) resolve(row, col);
    }
    return failures;
}

void excel_write(const std::string& workbook_path, const std::vector<CellEdit>& edits,
                 bool create_if_missing) {
    for (const auto& e : edits)
        if (e.row < 1 || e.col < 1)
            throw InvalidCoordinate("edit at (" + std::to_string(e.row) + "," +
                                    std::to_string(e.col) + ")");

    FileLock lock(workbook_path);

    bool is_xlsx = util::ends_with(workbook_path, ".xlsx");
    std::string canon_path = is_xlsx ? companion_canonical_path(workbook_path) : workbook_path;

    Workbook wb;
    bool exists = fs::exists(canon_path) || (is_xlsx && fs::exists(workbook_path));
    if (exists) {
        wb = load_workbook_auto(workbook_path);
    } else {
        if (!create_if_missing) throw FileNotFound(workbook_path);
        wb.workbook_id = fs::path(workbook_path).filename().string();
    }

    for (const auto& e : edits) {
        Sheet* sheet = wb.find_sheet(e.sheet);
        if (!sheet) {
            wb.sheets.push_back(Sheet{e.sheet, {}, 0, 0, {}});
            sheet = &wb.sheets.back();
        }
        sheet->set_cell(e.row, e.col, e.new_value);
    }
    if (wb.sheets.empty()) throw MalformedWorkbook("write produced a workbook with no sheets");

    auto failures = evaluate_workbook(wb);
    validate_workbook(wb);
    write_canonical(wb, canon_path);
    if (is_xlsx) write_xlsx(wb, workbook_path);
    if (!failures.empty()) {
        std::string detail;
        for (const auto& f : failures) detail += (detail.empty() ? "" : "; ") + f;
        throw EvalError(detail + " (formula text persisted, cached value marked error)");
    }
}

std::vector<std::vector<CellValue>> excel_read_range(const std::string& workbook_path,
                                                     const std::string& sheet_name,
                                                     const std::string& a1_range) {
    Workbook wb = load_workbook_auto(workbook_path);
    const Sheet* sheet = wb.find_sheet(sheet_name);
    if (!sheet) throw SheetNotFound(sheet_name);
    A1Range range = parse_a1_range(a1_range);
    std::vector<std::vector<CellValue>> grid;
    for (int row = range.row1; row <= range.row2; ++row) {
        std::vector<CellValue> out_row;
        for (int col = range.col1; col <= range.col2; ++col) {
            const CellValue* v = sheet->cell(row, col);
            out_row.push_back(v ? *v : CellValue::empty());
        }
        grid.push_back(std::move(out_row));
    }
    return grid;
}

// --- io ---

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    int line = 1, col = 0;
    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        end_field();
        records.push_back(std::move(row));
        row.clear();
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        ++col;
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
                if (c == '\n') {
                    ++line;
                    col = 0;
                }
            }
        } else if (c == '"') {
            if (field_started && !field.empty())
                throw ParseError("csv: stray quote at line " + std::to_string(line) + " col " +
                                 std::to_string(col));
            in_quotes = true;
            field_started = true;
        } else if (c == ',') {
            end_field();
        } else if (c == '\n') {
            if (!field.empty() && field.back() == '\r') field.pop_back();
            end_row();
            ++line;
            col = 0;
        } else {
            field.push_back(c);
            field_started = true;
        }
    }
    if (in_quotes) throw ParseError("csv: unterminated quoted field at line " + std::to_string(line));
    if (field_started || !row.empty()) end_row();
    return records;
}

std::string render_csv(const std::vector<std::vector<std::string>>& records) {
    std::string out;
    for (const auto& row : records) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out.push_back(',');
            const std::string& f = row[i];
            if (f.find_first_of(",\"\n\r") != std::string::npos) {
                out.push_back('"');
                out += util::replace_all(f, "\"", "\"\"");
                out.push_back('"');
            } else {
                out += f;
            }
        }
        out.push_back('\n');
    }
    return out;
}

static std::string format_for(const std::string& path) {
    if (util::ends_with(path, ".csv")) return "csv";
    if (util::ends_with(path, ".json")) return "json";
    if (util::ends_with(path, ".md") || util::ends_with(path, ".markdown")) return "markdown";
    if (util::ends_with(path, ".txt") || util::ends_with(path, ".text") ||
        util::ends_with(path, ".log"))
        return "text";
    if (util::ends_with(path, ".pdf") || util::ends_with(path, ".docx"))
        throw UnsupportedFormat(path + " (PDF/DOCX support is a stub)");
    return "text";
}

IoContent io_read(const std::string& path) {
    IoContent out;
    out.format = format_for(path);
    out.text = util::read_file(path);
    if (out.format == "csv") {
        out.records = parse_csv(out.text);
    } else if (out.format == "json") {
        try {
            (void)json::parse(out.text);
        } catch (const json::parse_error& e) {
            // byte offset -> line/column for the error message
            std::size_t line = 1, col = 1;
            for (std::size_t i = 0; i + 1 < e.byte && i < out.text.size(); ++i) {
                if (out.text[i] == '\n') {
                    ++line;
                    col = 1;
                } else {
                    ++col;
                }
            }
            throw ParseError("json at line " + std::to_string(line) + " col " +
                             std::to_string(col) + ": " + e.what());
        }
    }
    return out;
}

void io_write(const std::string& path, const std::string& content, const std::string& format) {
    if (format != "csv" && format != "json" && format != "text" && format != "markdown")
        throw UnsupportedFormat(format);
    if (format == "json") {
        try {
            (void)json::parse(content);
        } catch (const json::parse_error& e) {
            throw ParseError(std::string("json content: ") + e.what());
        }
    } else if (format == "csv") {
        (void)parse_csv(content);
    }
    util::write_file_atomic(path, content);
}

// --- validation checks ---

static double numeric_at(const Workbook& wb, const std::string& sheet_name,
                         const std::string& ref) {
    const Sheet* sheet = wb.find_sheet(sheet_name);
    if (!sheet) throw SheetNotFound(sheet_name);
    auto [row, col] = parse_a1(ref);
    const CellValue* v = sheet->cell(row, col);
    if (!v || v->is_empty() || !v->numeric || v->kind == CellKind::text)
        throw NonNumericCell(sheet_name + "!" + ref);
    return *v->numeric;
}

ValidationReport check_balance_sheet(const std::string& workbook_path, const std::string& sheet,
                                     const std::string& assets_ref,
                                     const std::string& liabilities_ref,
                                     const std::string& equity_ref, double tolerance) {
    Workbook wb = load_workbook_auto(workbook_path);
    evaluate_workbook(wb);
    double assets = numeric_at(wb, sheet, assets_ref);
    double liabilities = numeric_at(wb, sheet, liabilities_ref);
    double equity = numeric_at(wb, sheet, equity_ref);
    ValidationReport report;
    report.check_name = "balance_sheet_identity";
    report.lhs = assets;
    report.rhs = liabilities + equity;
    report.tolerance = tolerance;
    report.passed = std::fabs(report.lhs - report.rhs) <= tolerance;
    report.locations = {assets_ref, liabilities_ref, equity_ref};
    return report;
}

ValidationReport check_debit_credit(const std::string& workbook_path, const std::string& sheet_name,
                                    const std::string& debit_range,
                                    const std::string& credit_range, double tolerance) {
    Workbook wb = load_workbook_auto(workbook_path);
    evaluate_workbook(wb);
    const Sheet* sheet = wb.find_sheet(sheet_name);
    if (!sheet) throw SheetNotFound(sheet_name);
    auto sum_range = [&](const std::string& range_text) {
        A1Range range = parse_a1_range(range_text);
        double total = 0.0;
        for (int row = range.row1; row <= range.row2; ++row) {
            for (int col = range.col1; col <= range.col2; ++col) {
                const CellValue* v = sheet->cell(row, col);
                if (!v || v->is_empty()) continue;  // empties count 0
                if (!v->numeric || v->kind == CellKind::text)
                    throw NonNumericCell(sheet_name + "!" + a1_ref(row, col));
                total += *v->numeric;
            }
        }
        return total;
    };
    ValidationReport report;
    report.check_name = "debit_credit_equality";
    report.lhs = sum_range(debit_range);
    report.rhs = sum_range(credit_range);
    report.tolerance = tolerance;
    report.passed = std::fabs(report.lhs - report.rhs) <= tolerance;
    report.locations = {debit_range, credit_range};
    return report;
}

Transcription transcribe_image(const std::string& workbook_path, const std::string& image_id) {
    Workbook wb = load_workbook_auto(workbook_path);
    for (const auto& sheet : wb.sheets)
        for (const auto& img : sheet.images)
            if (img.image_id == image_id) return {img.alt_text, true};
    throw ImageNotFound(image_id);
}

// --- tool registries ---

namespace {

std::string render_grid(const std::vector<std::vector<CellValue>>& grid) {
    std::string out;
    for (const auto& row : grid) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += "\t";
            out += row[i].raw;
        }
        out += "\n";
    }
    return out;
}

CellValue cell_value_from_json(const json& j) {
    if (j.is_number()) return CellValue::number(j.get<double>());
    if (j.is_boolean()) return CellValue::boolean(j.get<bool>());
    if (j.is_null()) return CellValue::empty();
    std::string s = j.get<std::string>();
    if (!s.empty() && s[0] == '=') return CellValue::formula(s);
    return s.empty() ? CellValue::empty() : CellValue::text(s);
}

ToolResult wrap(const std::function<std::string()>& fn) {
    ToolResult r;
    try {
        r.text = fn();
    } catch (const std::exception& e) {
        r.ok = false;
        r.error = e.what();
    }
    return r;
}

Tool simple_tool(std::string name, std::string description, std::vector<ToolParam> params,
                 std::function<std::string(const json&)> fn) {
    Tool t;
    t.schema = {std::move(name), std::move(description), std::move(params)};
    t.invoke = [fn = std::move(fn)](const json& args) {
        return wrap([&] { return fn(args); });
    };
    return t;
}

Tool not_implemented_tool(const std::string& name) {
    Tool t;
    t.schema = {name, "stub: not implemented in this build", {}};
    t.invoke = [name](const json&) {
        ToolResult r;
        r.ok = false;
        r.error = "NotImplemented: " + name;
        return r;
    };
    return t;
}

}  // namespace

ToolRegistry make_excel_tools() {
    ToolRegistry reg;
    reg.add(simple_tool(
        "excel_read_range", "read a rectangular cell range from a workbook",
        {{"path", "string", true, "workbook path"},
         {"sheet", "string", true, "sheet name"},
         {"range", "string", true, "A1 range, e.g. A1:B2"}},
        [](const json& args) {
            auto grid = excel_read_range(args.at("path").get<std::string>(),
                                         args.at("sheet").get<std::string>(),
                                         args.at("range").get<std::string>());
            return render_grid(grid);
        }));
    reg.add(simple_tool(
        "excel_write_cells", "write cell values and formulas into a workbook",
        {{"path", "string", true, "workbook path (canonical, or .xlsx for dual output)"},
         {"edits", "string", true, "array of {sheet,row,col,value}"},
         {"create_if_missing", "string", false, "create the file when absent (default true)"}},
        [](const json& args) {
            std::vector<CellEdit> edits;
            for (const auto& je : args.at("edits")) {
                CellEdit e;
                e.sheet = je.at("sheet").get<std::string>();
                e.row = je.at("row").get<int>();
                e.col = je.at("col").get<int>();
                e.new_value = cell_value_from_json(je.at("value"));
                edits.push_back(std::move(e));
            }
            excel_write(args.at("path").get<std::string>(), edits,
                        args.value("create_if_missing", true));
            return "wrote " + std::to_string(edits.size()) + " cells to " +
                   args.at("path").get<std::string>();
        }));
    reg.add(simple_tool(
        "transcribe_image", "transcribe an embedded image (stub: returns alt text)",
        {{"path", "string", true, "workbook path"},
         {"image_id", "string", true, "image identifier"}},
        [](const json& args) {
            auto t = transcribe_image(args.at("path").get<std::string>(),
                                      args.at("image_id").get<std::string>());
            return t.text + (t.stub ? "\nocr=stub" : "");
        }));
    return reg;
}

ToolRegistry make_io_tools() {
    ToolRegistry reg;
    reg.add(simple_tool("io_read", "read a csv/json/text/markdown file",
                        {{"path", "string", true, "file path"}},
                        [](const json& args) {
                            auto content = io_read(args.at("path").get<std::string>());
                            return content.text;
                        }));
    reg.add(simple_tool(
        "io_write", "write a csv/json/text/markdown file atomically",
        {{"path", "string", true, "file path"},
         {"content", "string", true, "file content"},
         {"format", "string", true, "csv | json | text | markdown"}},
        [](const json& args) {
            io_write(args.at("path").get<std::string>(), args.at("content").get<std::string>(),
                     args.at("format").get<std::string>());
            return "wrote " + args.at("path").get<std::string>();
        }));
    reg.add(not_implemented_tool("write_pdf"));
    reg.add(not_implemented_tool("write_docx"));
    return reg;
}

ToolRegistry make_validation_tools() {
    ToolRegistry reg;
    reg.add(simple_tool(
        "check_balance_sheet", "verify assets = liabilities + equity within tolerance",
        {{"path", "string", true, "workbook path"},
         {"sheet", "string", true, "sheet name"},
         {"assets_ref", "string", true, "A1 ref"},
         {"liabilities_ref", "string", true, "A1 ref"},
         {"equity_ref", "string", true, "A1 ref"},
         {"tolerance", "string", false, "default 0.01"}},
        [](const json& args) {
            auto report = check_balance_sheet(
                args.at("path").get<std::string>(), args.at("sheet").get<std::string>(),
                args.at("assets_ref").get<std::string>(),
                args.at("liabilities_ref").get<std::string>(),
                args.at("equity_ref").get<std::string>(), args.value("tolerance", 0.01));
            return report.render();
        }));
    reg.add(simple_tool(
        "check_debit_credit", "verify total debits equal total credits within tolerance",
        {{"path", "string", true, "workbook path"},
         {"sheet", "string", true, "sheet name"},
         {"debit_range", "string", true, "A1 range"},
         {"credit_range", "string", true, "A1 range"},
         {"tolerance", "string", false, "default 0.01"}},
        [](const json& args) {
            auto report = check_debit_credit(
                args.at("path").get<std::string>(), args.at("sheet").get<std::string>(),
                args.at("debit_range").get<std::string>(),
                args.at("credit_range").get<std::string>(), args.value("tolerance", 0.01));
            return report.render();
        }));
    return reg;
}

ToolRegistry make_stub_tools(const std::vector<std::string>& tool_names) {
    ToolRegistry reg;
    for (const auto& name : tool_names) reg.add(not_implemented_tool(name));
    return reg;
}

}  // namespace gridrag
