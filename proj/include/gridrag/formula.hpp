#pragma once

#include <functional>
#include <string>

#include "gridrag/workbook.hpp"

namespace gridrag {

// Cell lookup used during evaluation. The resolver must return plain values
// (formula cells already resolved or cached) and reports reference cycles by
// throwing CycleDetected.
using CellResolver = std::function<CellValue(int row, int col)>;

// Evaluates the whitelisted subset: SUM, AVERAGE, MIN, MAX, COUNT, IF,
// arithmetic + - * / ^, comparisons, cell refs, ranges, parentheses.
// 64-bit float numerics; empty cells are 0 in arithmetic and excluded from
// AVERAGE / COUNT. expr must start with '='.
// Throws ParseError / UnknownFunction / EvalError / CycleDetected.
CellValue eval_formula(const std::string& expr, const CellResolver& resolver);

}  // namespace gridrag
