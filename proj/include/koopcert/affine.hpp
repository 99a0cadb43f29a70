#pragma once

#include <variant>
#include <vector>

#include "koopcert/expr.hpp"
#include "koopcert/matrix.hpp"

namespace koopcert {

// Result of splitting an expression vector as  es == coeff * targets + residual
// with a constant coefficient matrix and residuals free of every target.
struct AffineDecomposition {
    RationalMatrix coeff;        // rows match es, columns match targets
    std::vector<Expr> residual;  // one per input expression
};

// First witness of failure: d es[expr_index] / d target is not a constant.
struct NotAffine {
    size_t expr_index;
    Symbol target;
    Expr partial;
};

using AffineResult = std::variant<AffineDecomposition, NotAffine>;

// Affinity test and split. Succeeds iff every targeted partial derivative is
// a variable-free constant; the constant-gradient criterion makes this exact
// for the polynomial fragment and sound in the presence of elementary
// functions.
inline AffineResult affine_decompose(const std::vector<Expr>& es,
                                     const std::vector<Symbol>& targets) {
    if (targets.empty()) throw std::invalid_argument("affine_decompose: targets empty");
    RationalMatrix coeff(es.size(), targets.size());
    for (size_t i = 0; i < es.size(); ++i) {
        for (size_t j = 0; j < targets.size(); ++j) {
            Expr p = es[i].partial(targets[j]);
            if (!p.is_constant()) return NotAffine{i, targets[j], std::move(p)};
            coeff.at(i, j) = p.constant_value();
        }
    }
    std::vector<Expr> residual;
    residual.reserve(es.size());
    for (size_t i = 0; i < es.size(); ++i) {
        Expr r = es[i];
        for (size_t j = 0; j < targets.size(); ++j)
            r = r - Expr::symbol(targets[j]) * coeff.at(i, j);
        for (const auto& t : targets) {
            if (r.contains(t))
                throw std::logic_error("affine_decompose: residual still contains " + t.name);
        }
        residual.push_back(std::move(r));
    }
    return AffineDecomposition{std::move(coeff), std::move(residual)};
}

inline bool is_affine_in(const std::vector<Expr>& es, const std::vector<Symbol>& targets) {
    return std::holds_alternative<AffineDecomposition>(affine_decompose(es, targets));
}

// Applies a rational matrix to an expression vector.
inline std::vector<Expr> mat_apply(const RationalMatrix& m, const std::vector<Expr>& v) {
    if (m.cols() != v.size())
        throw DimensionMismatch("mat_apply: " + m.shape_string() + " applied to vector of size " +
                                std::to_string(v.size()));
    std::vector<Expr> out(m.rows());
    for (size_t r = 0; r < m.rows(); ++r) {
        Expr acc;
        for (size_t c = 0; c < m.cols(); ++c) {
            if (m.at(r, c) == 0) continue;
            acc = acc + v[c] * m.at(r, c);
        }
        out[r] = std::move(acc);
    }
    return out;
}

// Linear form  row(m, r) . symbols  as an expression.
inline Expr linear_combination(const RationalMatrix& m, size_t row,
                               const std::vector<Symbol>& symbols) {
    if (m.cols() != symbols.size())
        throw DimensionMismatch("linear_combination: width mismatch");
    Expr acc;
    for (size_t c = 0; c < symbols.size(); ++c) {
        if (m.at(row, c) == 0) continue;
        acc = acc + Expr::symbol(symbols[c]) * m.at(row, c);
    }
    return acc;
}

}  // namespace koopcert
