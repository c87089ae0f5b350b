#include "gridrag/formula.hpp"

#include <cctype>
#include <cmath>
#include <sstream>
#include <vector>

#include "gridrag/errors.hpp"

namespace gridrag {

namespace {

struct Value {
    enum class Kind { number, text, boolean, empty } kind = Kind::empty;
    double num = 0.0;
    std::string str;

    static Value number(double v) { return {Kind::number, v, {}}; }
    static Value text(std::string s) { return {Kind::text, 0.0, std::move(s)}; }
    static Value boolean(bool b) { return {Kind::boolean, b ? 1.0 : 0.0, {}}; }
    static Value empty() { return {}; }
};

// An argument is either a scalar value or a resolved range of cell values.
struct Arg {
    Value scalar;
    std::vector<Value> range;
    bool is_range = false;
};

double as_number(const Value& v) {
    switch (v.kind) {
        case Value::Kind::number:
        case Value::Kind::boolean: return v.num;
        case Value::Kind::empty: return 0.0;  // empty counts as 0 in arithmetic
        case Value::Kind::text: throw EvalError("text value in numeric context: \"" + v.str + "\"");
    }
    return 0.0;
}

bool truthy(const Value& v) {
    if (v.kind == Value::Kind::text) throw EvalError("text value in condition");
    return as_number(v) != 0.0;
}

Value from_cell(const CellValue& c) {
    switch (c.kind) {
        case CellKind::empty: return Value::empty();
        case CellKind::text: return Value::text(c.raw);
        case CellKind::boolean: return Value::boolean(c.numeric && *c.numeric != 0.0);
        case CellKind::number:
        case CellKind::datetime:
        case CellKind::formula:
            if (c.numeric) return Value::number(*c.numeric);
            return c.raw.empty() ? Value::empty() : Value::text(c.raw);
    }
    return Value::empty();
}

struct Token {
    enum class Kind { number, string, ident, op, lparen, rparen, comma, colon, end } kind;
    std::string text;
    double num = 0.0;
};

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) { advance(); }

    const Token& current() const { return cur_; }

    void advance() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        if (pos_ >= src_.size()) {
            cur_ = {Token::Kind::end, ""};
            return;
        }
        char c = src_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '.' && pos_ + 1 < src_.size() &&
             std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
            std::size_t start = pos_;
            while (pos_ < src_.size() &&
                   (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.'))
                ++pos_;
            if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
                ++pos_;
                if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
                while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_])))
                    ++pos_;
            }
            std::string text(src_.substr(start, pos_ - start));
            try {
                cur_ = {Token::Kind::number, text, std::stod(text)};
            } catch (...) {
                throw ParseError("bad number literal: " + text);
            }
            return;
        }
        if (c == '"') {
            std::string out;
            ++pos_;
            for (;;) {
                if (pos_ >= src_.size()) throw ParseError("unterminated string literal");
                if (src_[pos_] == '"') {
                    if (pos_ + 1 < src_.size() && src_[pos_ + 1] == '"') {
                        out.push_back('"');
                        pos_ += 2;
                        continue;
                    }
                    ++pos_;
                    break;
                }
                out.push_back(src_[pos_++]);
            }
            cur_ = {Token::Kind::string, std::move(out)};
            return;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '$' || c == '_') {
            std::size_t start = pos_;
            while (pos_ < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '$' ||
                    src_[pos_] == '_'))
                ++pos_;
            cur_ = {Token::Kind::ident, std::string(src_.substr(start, pos_ - start))};
            return;
        }
        switch (c) {
            case '(': cur_ = {Token::Kind::lparen, "("}; ++pos_; return;
            case ')': cur_ = {Token::Kind::rparen, ")"}; ++pos_; return;
            case ',': cur_ = {Token::Kind::comma, ","}; ++pos_; return;
            case ':': cur_ = {Token::Kind::colon, ":"}; ++pos_; return;
            case '<':
                if (pos_ + 1 < src_.size() && src_[pos_ + 1] == '=') { cur_ = {Token::Kind::op, "<="}; pos_ += 2; }
                else if (pos_ + 1 < src_.size() && src_[pos_ + 1] == '>') { cur_ = {Token::Kind::op, "<>"}; pos_ += 2; }
                else { cur_ = {Token::Kind::op, "<"}; ++pos_; }
                return;
            case '>':
                if (pos_ + 1 < src_.size() && src_[pos_ + 1] == '=') { cur_ = {Token::Kind::op, ">="}; pos_ += 2; }
                else { cur_ = {Token::Kind::op, ">"}; ++pos_; }
                return;
            case '+': case '-': case '*': case '/': case '^': case '=':
                cur_ = {Token::Kind::op, std::string(1, c)};
                ++pos_;
                return;
        }
        throw ParseError(std::string("unexpected character '") + c + "' in formula");
    }

private:
    std::string_view src_;
    std::size_t pos_ = 0;
    Token cur_;
};

// Bare A1 reference, optionally $-anchored ($A$1 treated as A1).
bool parse_cell_ident(const std::string& ident, int& row, int& col) {
    std::string letters, digits;
    std::size_t i = 0;
    if (i < ident.size() && ident[i] == '$') ++i;
    while (i < ident.size() && std::isupper(static_cast<unsigned char>(ident[i])))
        letters.push_back(ident[i++]);
    if (i < ident.size() && ident[i] == '$') ++i;
    while (i < ident.size() && std::isdigit(static_cast<unsigned char>(ident[i])))
        digits.push_back(ident[i++]);
    if (letters.empty() || digits.empty() || i != ident.size()) return false;
    if (letters.size() > 4 || digits.size() > 8) return false;
    col = a1_col_number(letters);
    row = std::stoi(digits);
    return row >= 1;
}

class Parser {
public:
    Parser(std::string_view src, const CellResolver& resolver)
        : lex_(src), resolver_(resolver) {}

    Value parse() {
        Value v = comparison();
        if (lex_.current().kind != Token::Kind::end)
            throw ParseError("trailing content after expression: " + lex_.current().text);
        return v;
    }

private:
    Lexer lex_;
    const CellResolver& resolver_;

    bool accept_op(const char* op) {
        if (lex_.current().kind == Token::Kind::op && lex_.current().text == op) {
            lex_.advance();
            return true;
        }
        return false;
    }

    Value comparison() {
        Value lhs = additive();
        const Token& t = lex_.current();
        if (t.kind != Token::Kind::op) return lhs;
        std::string op = t.text;
        if (op != "=" && op != "<>" && op != "<" && op != ">" && op != "<=" && op != ">=")
            return lhs;
        lex_.advance();
        Value rhs = additive();
        bool result;
        if (lhs.kind == Value::Kind::text || rhs.kind == Value::Kind::text) {
            if (lhs.kind != rhs.kind) {
                // mixed text/number comparison: only (in)equality is meaningful
                if (op == "=") return Value::boolean(false);
                if (op == "<>") return Value::boolean(true);
                throw EvalError("ordered comparison between text and number");
            }
            int cmp = lhs.str.compare(rhs.str);
            result = op == "=" ? cmp == 0 : op == "<>" ? cmp != 0 : op == "<" ? cmp < 0
                     : op == ">" ? cmp > 0 : op == "<=" ? cmp <= 0 : cmp >= 0;
        } else {
            double a = as_number(lhs), b = as_number(rhs);
            result = op == "=" ? a == b : op == "<>" ? a != b : op == "<" ? a < b
                     : op == ">" ? a > b : op == "<=" ? a <= b : a >= b;
        }
        return Value::boolean(result);
    }

    Value additive() {
        Value v = term();
        for (;;) {
            if (accept_op("+")) v = Value::number(checked(as_number(v) + as_number(term())));
            else if (accept_op("-")) v = Value::number(checked(as_number(v) - as_number(term())));
            else return v;
        }
    }

    Value term() {
        Value v = power();
        for (;;) {
            if (accept_op("*")) {
                v = Value::number(checked(as_number(v) * as_number(power())));
            } else if (accept_op("/")) {
                double d = as_number(power());
                if (d == 0.0) throw EvalError("division by zero");
                v = Value::number(checked(as_number(v) / d));
            } else {
                return v;
            }
        }
    }

    Value power() {  // right-associative
        Value base = unary();
        if (accept_op("^")) {
            double e = as_number(power());
            return Value::number(checked(std::pow(as_number(base), e)));
        }
        return base;
    }

    Value unary() {
        if (accept_op("-")) return Value::number(-as_number(unary()));
        if (accept_op("+")) return Value::number(as_number(unary()));
        return primary();
    }

    static double checked(double v) {
        if (!std::isfinite(v)) throw EvalError("non-finite result");
        return v;
    }

    Value primary() {
        const Token t = lex_.current();
        switch (t.kind) {
            case Token::Kind::number:
                lex_.advance();
                return Value::number(t.num);
            case Token::Kind::string:
                lex_.advance();
                return Value::text(t.text);
            case Token::Kind::lparen: {
                lex_.advance();
                Value v = comparison();
                if (lex_.current().kind != Token::Kind::rparen) throw ParseError("missing ')'");
                lex_.advance();
                return v;
            }
            case Token::Kind::ident: {
                lex_.advance();
                if (t.text == "TRUE") return Value::boolean(true);
                if (t.text == "FALSE") return Value::boolean(false);
                if (lex_.current().kind == Token::Kind::lparen) return call(t.text);
                int row, col;
                if (parse_cell_ident(t.text, row, col)) {
                    if (lex_.current().kind == Token::Kind::colon)
                        throw ParseError("range outside function argument: " + t.text);
                    return from_cell(resolver_(row, col));
                }
                throw ParseError("unknown identifier: " + t.text);
            }
            default:
                throw ParseError("unexpected token: " + (t.text.empty() ? "<end>" : t.text));
        }
    }

    Arg argument() {
        // a range is only legal directly as a function argument
        if (lex_.current().kind == Token::Kind::ident) {
            int r1, c1;
            if (parse_cell_ident(lex_.current().text, r1, c1)) {
                // lookahead for ':'
                Lexer saved = lex_;
                lex_.advance();
                if (lex_.current().kind == Token::Kind::colon) {
                    lex_.advance();
                    if (lex_.current().kind != Token::Kind::ident)
                        throw ParseError("expected cell after ':'");
                    int r2, c2;
                    if (!parse_cell_ident(lex_.current().text, r2, c2))
                        throw ParseError("bad range end: " + lex_.current().text);
                    lex_.advance();
                    Arg a;
                    a.is_range = true;
                    for (int row = std::min(r1, r2); row <= std::max(r1, r2); ++row)
                        for (int col = std::min(c1, c2); col <= std::max(c1, c2); ++col)
                            a.range.push_back(from_cell(resolver_(row, col)));
                    return a;
                }
                lex_ = saved;  // plain cell ref; fall through to expression parse
            }
        }
        Arg a;
        a.scalar = comparison();
        return a;
    }

    Value call(const std::string& raw_name) {
        std::string name;
        for (char c : raw_name) name.push_back(char(std::toupper(static_cast<unsigned char>(c))));
        lex_.advance();  // '('
        std::vector<Arg> args;
        if (lex_.current().kind != Token::Kind::rparen) {
            args.push_back(argument());
            while (lex_.current().kind == Token::Kind::comma) {
                lex_.advance();
                args.push_back(argument());
            }
        }
        if (lex_.current().kind != Token::Kind::rparen)
            throw ParseError("missing ')' in call to " + name);
        lex_.advance();

        auto numeric_items = [&](bool include_scalars_strictly) {
            std::vector<double> out;
            for (const auto& a : args) {
                if (a.is_range) {
                    for (const auto& v : a.range)
                        if (v.kind == Value::Kind::number || v.kind == Value::Kind::boolean)
                            out.push_back(v.num);
                } else if (a.scalar.kind != Value::Kind::empty) {
                    if (include_scalars_strictly) out.push_back(as_number(a.scalar));
                    else if (a.scalar.kind == Value::Kind::number ||
                             a.scalar.kind == Value::Kind::boolean)
                        out.push_back(a.scalar.num);
                }
            }
            return out;
        };

        if (name == "SUM") {
            double total = 0.0;
            for (double v : numeric_items(true)) total += v;
            return Value::number(checked(total));
        }
        if (name == "AVERAGE") {
            auto items = numeric_items(true);
            if (items.empty()) throw EvalError("AVERAGE of no numeric values");
            double total = 0.0;
            for (double v : items) total += v;
            return Value::number(checked(total / double(items.size())));
        }
        if (name == "COUNT") {
            return Value::number(double(numeric_items(false).size()));
        }
        if (name == "MIN" || name == "MAX") {
            auto items = numeric_items(true);
            if (items.empty()) return Value::number(0.0);
            double best = items[0];
            for (double v : items) best = name == "MIN" ? std::min(best, v) : std::max(best, v);
            return Value::number(best);
        }
        if (name == "IF") {
            if (args.size() != 2 && args.size() != 3)
                throw ParseError("IF takes 2 or 3 arguments");
            for (const auto& a : args)
                if (a.is_range) throw ParseError("IF does not take range arguments");
            if (truthy(args[0].scalar)) return args[1].scalar;
            return args.size() == 3 ? args[2].scalar : Value::boolean(false);
        }
        throw UnknownFunction(name);
    }
};

}  // namespace

CellValue eval_formula(const std::string& expr, const CellResolver& resolver) {
    if (expr.empty() || expr[0] != '=') throw ParseError("formula must start with '='");
    Parser parser(std::string_view(expr).substr(1), resolver);
    Value v = parser.parse();
    switch (v.kind) {
        case Value::Kind::number: return CellValue::number(v.num);
        case Value::Kind::text: return CellValue::text(v.str);
        case Value::Kind::boolean: return CellValue::boolean(v.num != 0.0);
        case Value::Kind::empty: return CellValue::empty();
    }
    return CellValue::empty();
}

}  // namespace gridrag
