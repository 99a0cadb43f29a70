#pragma once

#include <cctype>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "koopcert/expr.hpp"

namespace koopcert {

// Error with a 1-based character position into the offending text.
struct ParseError : std::runtime_error {
    ParseError(std::string message, size_t position)
        : std::runtime_error(std::move(message) + " (at position " + std::to_string(position) + ")"),
          position(position) {}
    size_t position;
};

// Recursive-descent parser for the expression grammar
//   expr   := ['+'|'-'] term (('+'|'-') term)*
//   term   := factor ('*' factor)*
//   factor := base ('^' uint)?
//   base   := number | identifier | '(' expr ')' | func '(' expr ')'
//   func   := sin | cos | exp
//   number := digits ('.' digits)? | digits '/' digits
// Decimal literals become exact rationals. Identifiers must be declared in
// the symbol map handed to the parser. No implicit multiplication, no
// division outside numeric literals.
class ExprParser {
public:
    ExprParser(std::string text, const std::map<std::string, Symbol>& symbols)
        : text_(std::move(text)), symbols_(symbols) {}

    Expr parse() {
        Expr e = parse_expr();
        skip_ws();
        if (pos_ < text_.size())
            throw ParseError("unexpected trailing input '" + std::string(1, text_[pos_]) + "'",
                             pos_ + 1);
        return e;
    }

private:
    Expr parse_expr() {
        skip_ws();
        bool negate = false;
        if (peek() == '+' || peek() == '-') {
            negate = text_[pos_] == '-';
            ++pos_;
        }
        Expr acc = parse_term();
        if (negate) acc = -acc;
        while (true) {
            skip_ws();
            char c = peek();
            if (c != '+' && c != '-') break;
            ++pos_;
            Expr rhs = parse_term();
            acc = c == '+' ? acc + rhs : acc - rhs;
        }
        return acc;
    }

    Expr parse_term() {
        Expr acc = parse_factor();
        while (true) {
            skip_ws();
            if (peek() != '*') break;
            ++pos_;
            acc = acc * parse_factor();
        }
        return acc;
    }

    Expr parse_factor() {
        Expr base = parse_base();
        skip_ws();
        if (peek() != '^') return base;
        ++pos_;
        skip_ws();
        size_t start = pos_;
        if (!isdigit(peek()))
            throw ParseError("exponent must be a nonnegative integer", pos_ + 1);
        while (isdigit(peek())) ++pos_;
        int exp = std::stoi(text_.substr(start, pos_ - start));
        return base.pow(exp);
    }

    Expr parse_base() {
        skip_ws();
        char c = peek();
        if (c == '\0') throw ParseError("unexpected end of expression", pos_ + 1);
        if (c == '(') {
            ++pos_;
            Expr inner = parse_expr();
            expect(')');
            return inner;
        }
        if (isdigit(c)) return parse_number();
        if (isalpha(c) || c == '_') {
            size_t start = pos_;
            while (isalnum(peek()) || peek() == '_') ++pos_;
            std::string name = text_.substr(start, pos_ - start);
            if (name == "sin" || name == "cos" || name == "exp") {
                FuncKind fn = name == "sin"   ? FuncKind::sin
                              : name == "cos" ? FuncKind::cos
                                              : FuncKind::exp;
                skip_ws();
                expect('(');
                Expr arg = parse_expr();
                expect(')');
                return Expr::function(fn, arg);
            }
            auto it = symbols_.find(name);
            if (it == symbols_.end())
                throw ParseError("undeclared identifier '" + name + "'", start + 1);
            return Expr::symbol(it->second);
        }
        throw ParseError("unexpected character '" + std::string(1, c) + "'", pos_ + 1);
    }

    Expr parse_number() {
        size_t start = pos_;
        while (isdigit(peek())) ++pos_;
        if (peek() == '.') {
            ++pos_;
            if (!isdigit(peek()))
                throw ParseError("expected digits after decimal point", pos_ + 1);
            while (isdigit(peek())) ++pos_;
        } else if (peek() == '/' && pos_ + 1 < text_.size() && isdigit(text_[pos_ + 1])) {
            ++pos_;
            while (isdigit(peek())) ++pos_;
        }
        return Expr::constant(rational_from_literal(text_.substr(start, pos_ - start)));
    }

    void expect(char c) {
        skip_ws();
        if (peek() != c)
            throw ParseError("expected '" + std::string(1, c) + "'", pos_ + 1);
        ++pos_;
    }

    char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }
    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }
    static bool isdigit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }
    static bool isalpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
    static bool isalnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

    std::string text_;
    const std::map<std::string, Symbol>& symbols_;
    size_t pos_ = 0;
};

inline Expr parse_expression(const std::string& text,
                             const std::map<std::string, Symbol>& symbols) {
    return ExprParser(text, symbols).parse();
}

inline Expr parse_expression(const std::string& text, const std::vector<Symbol>& symbols) {
    std::map<std::string, Symbol> m;
    for (const auto& s : symbols) m.emplace(s.name, s);
    return ExprParser(text, m).parse();
}

}  // namespace koopcert
