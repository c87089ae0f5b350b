#pragma once

#include <string>
#include <vector>

#include "gridrag/agent.hpp"
#include "gridrag/formula.hpp"
#include "gridrag/workbook.hpp"

namespace gridrag {

struct CellEdit {
    std::string sheet;
    int row = 0;
    int col = 0;
    CellValue new_value;
};

struct ValidationReport {
    std::string check_name;
    bool passed = false;
    double lhs = 0.0;
    double rhs = 0.0;
    double tolerance = 0.0;
    std::vector<std::string> locations;  // A1 refs the check read

    std::string render() const;
};

constexpr double kCurrencyTolerance = 0.01;

// Loads a workbook by extension: canonical (.json) or OOXML (.xlsx). For an
// .xlsx path whose canonical companion exists (written by excel_write), the
// companion wins — it is bit-exact.
Workbook load_workbook_auto(const std::string& path);

// Dense grid exactly covering the range; cells beyond content are kind=empty.
std::vector<std::vector<CellValue>> excel_read_range(const std::string& workbook_path,
                                                     const std::string& sheet,
                                                     const std::string& a1_range);

// Applies edits atomically (temp file + rename, advisory lockfile per path).
// Formula cells are stored as text and immediately evaluated into a cached
// value; evaluation failures persist the formula with an error marker and
// then raise EvalError. Canonical output always; XLSX alongside when the
// path ends in .xlsx.
void excel_write(const std::string& workbook_path, const std::vector<CellEdit>& edits,
                 bool create_if_missing);

// Re-evaluates every formula cell in place with cycle detection.
// Returns A1 refs (sheet!cell) of cells whose evaluation failed.
std::vector<std::string> evaluate_workbook(Workbook& wb);

struct IoContent {
    std::string format;  // csv | json | text | markdown
    std::string text;    // raw file content
    std::vector<std::vector<std::string>> records;  // csv rows incl. header
};

IoContent io_read(const std::string& path);
void io_write(const std::string& path, const std::string& content, const std::string& format);

std::vector<std::vector<std::string>> parse_csv(const std::string& text);
std::string render_csv(const std::vector<std::vector<std::string>>& records);

ValidationReport check_balance_sheet(const std::string& workbook_path, const std::string& sheet,
                                     const std::string& assets_ref,
                                     const std::string& liabilities_ref,
                                     const std::string& equity_ref,
                                     double tolerance = kCurrencyTolerance);

ValidationReport check_debit_credit(const std::string& workbook_path, const std::string& sheet,
                                    const std::string& debit_range,
                                    const std::string& credit_range,
                                    double tolerance = kCurrencyTolerance);

struct Transcription {
    std::string text;
    bool stub = true;  // default implementation returns alt text verbatim
};

Transcription transcribe_image(const std::string& workbook_path, const std::string& image_id);

// Tool registries for the typed executors. Search tools live in agent.hpp.
ToolRegistry make_excel_tools();
ToolRegistry make_io_tools();
ToolRegistry make_validation_tools();
ToolRegistry make_stub_tools(const std::vector<std::string>& tool_names);

}  // namespace gridrag
