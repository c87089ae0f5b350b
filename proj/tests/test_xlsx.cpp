#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>

#include "doctest.h"
#include "gridrag/errors.hpp"
#include "gridrag/util/strings.hpp"
#include "gridrag/workbook.hpp"

using namespace gridrag;
namespace fs = std::filesystem;

static const std::string kSamplePath = std::string(FIXTURE_DIR) + "/sample.xlsx";

TEST_CASE("ingest sample xlsx") {
    XlsxIngest result = ingest_xlsx(kSamplePath);
    const Workbook& wb = result.workbook;
    REQUIRE(wb.sheets.size() == 1);
    const Sheet& s = wb.sheets[0];
    CHECK(s.name == "Data");
    // workbook_id is content-addressed: stem plus a digest prefix
    CHECK(util::starts_with(wb.workbook_id, "sample-"));
    CHECK(wb.workbook_id.size() == std::string("sample-").size() + 12);

    REQUIRE(s.cell(1, 1) != nullptr);
    CHECK(s.cell(1, 1)->raw == "Amount");  // shared string
    REQUIRE(s.cell(2, 1) != nullptr);
    CHECK(*s.cell(2, 1)->numeric == 2.0);
    REQUIRE(s.cell(2, 2) != nullptr);
    CHECK(s.cell(2, 2)->kind == CellKind::boolean);
    REQUIRE(s.cell(3, 2) != nullptr);
    CHECK(s.cell(3, 2)->raw == "note");  // inline string

    const CellValue* f = s.cell(4, 2);
    REQUIRE(f != nullptr);
    CHECK(f->kind == CellKind::formula);
    CHECK(*f->formula_text == "=SUM(A2:A3)");
    REQUIRE(f->numeric.has_value());  // cached <v> carried over
    CHECK(*f->numeric == 5.0);

    REQUIRE(s.images.size() == 1);
    CHECK(s.images[0].alt_text == "amount trend sparkline");
    CHECK(s.images[0].row == 1);
    CHECK(s.images[0].col == 3);  // 0-based anchor col 2
    CHECK(s.images[0].encoding == "image/png");
    CHECK_FALSE(s.images[0].payload.empty());
}

TEST_CASE("xlsx write then ingest round trip") {
    Workbook wb = ingest_xlsx(kSamplePath).workbook;
    std::string out = (fs::temp_directory_path() / "gridrag_rt.xlsx").string();
    write_xlsx(wb, out);
    Workbook back = ingest_xlsx(out).workbook;
    REQUIRE(back.sheets.size() == 1);
    const Sheet& a = wb.sheets[0];
    const Sheet& b = back.sheets[0];
    CHECK(a.cells == b.cells);
    REQUIRE(b.images.size() == 1);
    CHECK(b.images[0].payload == a.images[0].payload);
    CHECK(b.images[0].alt_text == a.images[0].alt_text);

    // writer output is byte-deterministic
    std::string out2 = (fs::temp_directory_path() / "gridrag_rt2.xlsx").string();
    write_xlsx(wb, out2);
    CHECK(util::read_file(out) == util::read_file(out2));
    fs::remove(out);
    fs::remove(out2);
}

TEST_CASE("ingest rejects non-xlsx input") {
    CHECK_THROWS_AS(ingest_xlsx("/nonexistent.xlsx"), FileNotFound);
    CHECK_THROWS_AS(ingest_xlsx(std::string(FIXTURE_DIR) + "/toy_ledger.wb.json"),
                    UnsupportedFormat);
    std::string junk = (fs::temp_directory_path() / "gridrag_junk.xlsx").string();
    util::write_file(junk, "this is not a zip archive");
    CHECK_THROWS_AS(ingest_xlsx(junk), Error);
    fs::remove(junk);
}
