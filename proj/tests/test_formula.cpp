#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <map>
#include <random>
#include <sstream>

#include "doctest.h"
#include "gridrag/errors.hpp"
#include "gridrag/formula.hpp"

using namespace gridrag;

namespace {

CellResolver grid_resolver(std::map<std::pair<int, int>, CellValue> cells) {
    return [cells = std::move(cells)](int row, int col) -> CellValue {
        auto it = cells.find({row, col});
        return it == cells.end() ? CellValue::empty() : it->second;
    };
}

double eval_num(const std::string& expr, const CellResolver& r = grid_resolver({})) {
    CellValue v = eval_formula(expr, r);
    REQUIRE(v.numeric.has_value());
    return *v.numeric;
}

}  // namespace

TEST_CASE("arithmetic and precedence") {
    CHECK(eval_num("=1+2*3") == 7);
    CHECK(eval_num("=(1+2)*3") == 9);
    CHECK(eval_num("=10-4-3") == 3);          // left associative
    CHECK(eval_num("=2^3^2") == 512);          // power is right associative
    CHECK(eval_num("=-2^2") == doctest::Approx(4));  // unary binds tighter than ^
    CHECK(eval_num("=-(2^2)") == doctest::Approx(-4));
    CHECK(eval_num("=7/2") == doctest::Approx(3.5));
    CHECK(eval_num("=1.5e2+1") == doctest::Approx(151));
}

TEST_CASE("comparisons yield 1 or 0") {
    CHECK(eval_num("=1<2") == 1);
    CHECK(eval_num("=2<=2") == 1);
    CHECK(eval_num("=3>4") == 0);
    CHECK(eval_num("=1<>2") == 1);
    CHECK(eval_num("=1=1") == 1);
}

TEST_CASE("cell references and empty-cell semantics") {
    auto r = grid_resolver({{{1, 1}, CellValue::number(2)},
                            {{2, 1}, CellValue::number(4)}});
    CHECK(eval_num("=A1+A2", r) == 6);
    CHECK(eval_num("=A1+A3", r) == 2);  // empty is 0 in arithmetic
    CHECK(eval_num("=$A$1*2", r) == 4);
    CHECK(eval_num("=SUM(A1:A3)", r) == 6);
    // AVERAGE and COUNT exclude empties
    CHECK(eval_num("=AVERAGE(A1:A3)", r) == 3);
    CHECK(eval_num("=COUNT(A1:A3)", r) == 2);
    CHECK(eval_num("=MIN(A1:A3)", r) == 2);
    CHECK(eval_num("=MAX(A1:A3)", r) == 4);
}

TEST_CASE("IF and nesting") {
    auto r = grid_resolver({{{1, 1}, CellValue::number(10)}});
    CHECK(eval_num("=IF(A1>5, 1, 2)", r) == 1);
    CHECK(eval_num("=IF(A1<5, 1, 2)", r) == 2);
    CHECK(eval_num("=IF(A1>5, SUM(A1:A1), 0)", r) == 10);
}

TEST_CASE("function names are case insensitive, whitelist enforced") {
    auto r = grid_resolver({{{1, 1}, CellValue::number(3)}});
    CHECK(eval_num("=sum(A1:A1)", r) == 3);
    CHECK_THROWS_AS(eval_num("=VLOOKUP(A1, A1:B2, 2)", r), UnknownFunction);
    CHECK_THROWS_AS(eval_num("=INDIRECT(\"A1\")", r), UnknownFunction);
}

TEST_CASE("errors") {
    CHECK_THROWS_AS(eval_num("=1/0"), EvalError);
    CHECK_THROWS_AS(eval_num("=1+"), ParseError);
    CHECK_THROWS_AS(eval_num("=(1"), ParseError);
    CHECK_THROWS_AS(eval_num("SUM(A1)"), ParseError);  // missing '='
    // ranges are valid only as function arguments
    CHECK_THROWS_AS(eval_num("=A1:A3+1"), ParseError);
    auto text = grid_resolver({{{1, 1}, CellValue::text("abc")}});
    CHECK_THROWS_AS(eval_num("=A1+1", text), EvalError);
}

TEST_CASE("random expression oracle") {
    // expression trees built with known values, rendered, then evaluated
    std::mt19937 rng(123);
    std::uniform_real_distribution<double> num(1.0, 9.0);
    struct Node {
        std::string text;
        double value;
    };
    std::function<Node(int)> gen = [&](int depth) -> Node {
        if (depth <= 0 || rng() % 3 == 0) {
            double v = std::floor(num(rng) * 4) / 4.0;
            std::ostringstream ss;
            ss << v;
            return {ss.str(), v};
        }
        Node a = gen(depth - 1);
        Node b = gen(depth - 1);
        switch (rng() % 4) {
            case 0: return {"(" + a.text + "+" + b.text + ")", a.value + b.value};
            case 1: return {"(" + a.text + "-" + b.text + ")", a.value - b.value};
            case 2: return {"(" + a.text + "*" + b.text + ")", a.value * b.value};
            default:
                if (std::abs(b.value) < 0.01)
                    return {"(" + a.text + "+" + b.text + ")", a.value + b.value};
                return {"(" + a.text + "/" + b.text + ")", a.value / b.value};
        }
    };
    for (int i = 0; i < 1000; ++i) {
        Node n = gen(4);
        CHECK(eval_num("=" + n.text) == doctest::Approx(n.value).epsilon(1e-9));
    }
}
