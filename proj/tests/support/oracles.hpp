// Test-only oracles, kept independent of the library code paths they check.
#pragma once

#include <random>
#include <vector>

#include "koopcert/affine.hpp"
#include "koopcert/expr.hpp"
#include "koopcert/matrix.hpp"

namespace koopcert::testing {

// Brute-force affinity check by monomial inspection: a polynomial is affine
// in the targets iff every monomial has total target-degree <= 1 and the
// monomials of target-degree 1 contain no other variables (the coefficient of
// each target must be variable-free).
inline bool affine_by_monomial_inspection(const Expr& e, const std::vector<Symbol>& targets) {
    auto is_target = [&](const Symbol& s) {
        for (const auto& t : targets)
            if (t == s) return true;
        return false;
    };
    for (const auto& term : e.terms()) {
        if (!term.funcs.empty()) return false;  // oracle only covers polynomials
        int target_degree = 0;
        bool has_other = false;
        for (const auto& [s, exp] : term.powers) {
            if (is_target(s))
                target_degree += exp;
            else
                has_other = true;
        }
        if (target_degree > 1) return false;
        if (target_degree == 1 && has_other) return false;
    }
    return true;
}

// Independent rank computation: forward elimination without normalization,
// pivot chosen as the entry with the largest absolute numerator (a different
// rule than the library's first-nonzero pivoting).
inline size_t rank_oracle(RationalMatrix m) {
    size_t rk = 0;
    for (size_t col = 0; col < m.cols() && rk < m.rows(); ++col) {
        size_t best = m.rows();
        Rational best_mag = 0;
        for (size_t r = rk; r < m.rows(); ++r) {
            Rational mag = m.at(r, col) < 0 ? Rational(-m.at(r, col)) : m.at(r, col);
            if (mag > best_mag) {
                best_mag = mag;
                best = r;
            }
        }
        if (best == m.rows()) continue;
        m.swap_rows(rk, best);
        for (size_t r = rk + 1; r < m.rows(); ++r) {
            if (m.at(r, col) == 0) continue;
            Rational f = -m.at(r, col) / m.at(rk, col);
            m.add_scaled_row(r, rk, f);
        }
        ++rk;
    }
    return rk;
}

// Derivative oracle: d/ds p == coefficient of eps^1 in p(s -> s + eps), for a
// fresh symbol eps. Exercises substitute instead of the partial code path.
inline Expr derivative_by_shift(const Expr& e, const Symbol& s) {
    Symbol eps{"eps~oracle", SymbolKind::auxiliary, 99999};
    std::map<std::string, Expr> binding{
        {s.name, Expr::symbol(s) + Expr::symbol(eps)}};
    Expr shifted = e.substitute(binding);
    // keep the terms linear in eps and strip the eps factor
    std::vector<Term> kept;
    for (const auto& t : shifted.terms()) {
        Term copy = t;
        bool linear_in_eps = false;
        for (size_t i = 0; i < copy.powers.size(); ++i) {
            if (copy.powers[i].first == eps) {
                if (copy.powers[i].second == 1) {
                    copy.powers.erase(copy.powers.begin() + static_cast<long>(i));
                    linear_in_eps = true;
                }
                break;
            }
        }
        if (linear_in_eps) kept.push_back(copy);
    }
    return Expr::from_terms(std::move(kept));
}

struct Rng {
    explicit Rng(uint64_t seed) : gen(seed) {}
    std::mt19937_64 gen;

    int uniform_int(int lo, int hi) {
        return std::uniform_int_distribution<int>(lo, hi)(gen);
    }
    // numerator and denominator bounded by `bound`, denominator positive
    Rational rational(int bound = 9, bool allow_zero = true) {
        int num = uniform_int(allow_zero ? -bound : 1, bound);
        if (!allow_zero && num == 0) num = 1;
        int den = uniform_int(1, bound);
        return Rational(Int(num), Int(den));
    }
    // finer grid: exact cancellations in transformed blocks become rare, so
    // draws behave like generic (continuous) coefficients
    Rational fine_rational(int num_bound = 99, int den_bound = 16) {
        int num = uniform_int(-num_bound, num_bound);
        if (num == 0) num = 1;
        return Rational(Int(num), Int(uniform_int(1, den_bound)));
    }
};

inline Expr random_polynomial(Rng& rng, const std::vector<Symbol>& symbols, int max_degree,
                              int max_terms) {
    std::vector<Term> terms;
    int nterms = rng.uniform_int(1, max_terms);
    for (int t = 0; t < nterms; ++t) {
        Term term;
        term.coeff = rng.rational(9);
        if (term.coeff == 0) term.coeff = 1;
        int degree = rng.uniform_int(0, max_degree);
        std::map<std::string, std::pair<Symbol, int>> powers;
        for (int d = 0; d < degree; ++d) {
            const Symbol& s = symbols[static_cast<size_t>(
                rng.uniform_int(0, static_cast<int>(symbols.size()) - 1))];
            auto [it, fresh] = powers.emplace(s.name, std::make_pair(s, 1));
            if (!fresh) ++it->second.second;
        }
        for (auto& [name, p] : powers) term.powers.push_back(p);
        std::sort(term.powers.begin(), term.powers.end(),
                  [](const auto& a, const auto& b) { return symbol_before(a.first, b.first); });
        terms.push_back(std::move(term));
    }
    return Expr::from_terms(std::move(terms));
}

inline RationalMatrix random_matrix(Rng& rng, size_t rows, size_t cols, int bound = 3) {
    RationalMatrix m(rows, cols);
    for (size_t r = 0; r < rows; ++r)
        for (size_t c = 0; c < cols; ++c) m.at(r, c) = Rational(rng.uniform_int(-bound, bound));
    return m;
}

inline RationalMatrix random_invertible(Rng& rng, size_t n, int bound = 3) {
    while (true) {
        RationalMatrix m = random_matrix(rng, n, n, bound);
        if (rank(m) == n) return m;
    }
}

// Unit-triangular product with a row shuffle: always invertible, and the
// inverse has integer entries, which keeps coefficient growth small when the
// transform is applied repeatedly.
inline RationalMatrix random_unimodular(Rng& rng, size_t n, int bound = 2) {
    RationalMatrix lower = RationalMatrix::identity(n);
    RationalMatrix upper = RationalMatrix::identity(n);
    for (size_t r = 0; r < n; ++r)
        for (size_t c = 0; c < n; ++c) {
            if (r > c) lower.at(r, c) = Rational(rng.uniform_int(-bound, bound));
            if (r < c) upper.at(r, c) = Rational(rng.uniform_int(-bound, bound));
        }
    RationalMatrix perm(n, n);
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    for (size_t i = n; i > 1; --i)
        std::swap(order[i - 1], order[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);
    for (size_t i = 0; i < n; ++i) perm.at(i, order[i]) = 1;
    return perm * lower * upper;
}

}  // namespace koopcert::testing
