#pragma once

#include <map>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "koopcert/certifier.hpp"

namespace koopcert {

struct NonPolynomialGenerator : std::domain_error {
    explicit NonPolynomialGenerator(const std::string& expr)
        : std::domain_error("closure search requires polynomial generators, got: " + expr) {}
};
struct StateNotInSpan : std::domain_error {
    explicit StateNotInSpan(const std::string& name)
        : std::domain_error("state " + name + " is not in the span of the lifting") {}
};
struct StateNotReconstructible : std::domain_error {
    StateNotReconstructible()
        : std::domain_error("output matrix is zero; the state cannot be reconstructed") {}
};

// Ordered monomial dictionary over the autonomous coordinates. The first n2
// entries are the coordinates themselves.
struct Dictionary {
    std::vector<Expr> basis;
    std::vector<Symbol> variables;
    size_t n2 = 0;
};

// Exact lifted linear model:  lifting(f(x,u)) = a_k lifting(x) + b_k u  and
// x = c_k lifting(x). `states`/`inputs` carry the symbols the lifting is
// written over.
struct KoopmanModel {
    std::vector<Expr> lifting;
    RationalMatrix a_k;
    RationalMatrix b_k;
    RationalMatrix c_k;
    std::vector<Symbol> states;
    std::vector<Symbol> inputs;
    bool exact = true;

    size_t lifted_dim() const { return lifting.size(); }
};

struct Closed {
    Dictionary dictionary;
    RationalMatrix a_bar;  // composition action on the dictionary
    RationalMatrix c_bar;  // expresses col(x2, g) in the dictionary
};
struct Unbounded {
    size_t reached_size = 0;
    int reached_degree = 0;
    std::vector<Expr> frontier;  // monomials still missing when the bound was hit
};
using ClosureResult = std::variant<Closed, Unbounded>;

namespace detail {

using MonomialKey = std::vector<std::pair<Symbol, int>>;

struct MonomialKeyLess {
    bool operator()(const MonomialKey& a, const MonomialKey& b) const {
        Term ta{Rational(1), a, {}};
        Term tb{Rational(1), b, {}};
        return compare_term_key(ta, tb) < 0;
    }
};

inline Expr monomial_expr(const MonomialKey& k) {
    return Expr::from_terms({Term{Rational(1), k, {}}});
}

inline int monomial_degree(const MonomialKey& k) {
    int d = 0;
    for (const auto& [s, e] : k) d += e;
    return d;
}

// All monomial shapes of a polynomial expression.
inline std::vector<MonomialKey> monomial_keys(const Expr& e) {
    std::vector<MonomialKey> out;
    for (const auto& t : e.terms()) {
        if (!t.funcs.empty()) throw NonPolynomialGenerator(e.to_string());
        out.push_back(t.powers);
    }
    return out;
}

// Coefficient matrix of a family of polynomials over the union of their
// monomials; rows follow the deterministic monomial order.
struct CoefficientTable {
    std::vector<MonomialKey> monomials;
    std::map<MonomialKey, size_t, MonomialKeyLess> index;

    void absorb(const Expr& e) {
        for (auto& k : monomial_keys(e))
            if (index.emplace(k, 0).second) monomials.push_back(k);
    }
    void freeze() {
        std::sort(monomials.begin(), monomials.end(), MonomialKeyLess{});
        for (size_t i = 0; i < monomials.size(); ++i) index[monomials[i]] = i;
    }
    RationalMatrix column(const Expr& e) const {
        RationalMatrix col(monomials.size(), 1);
        for (const auto& t : e.terms()) col.at(index.at(t.powers), 0) = t.coeff;
        return col;
    }
    RationalMatrix matrix(const std::vector<Expr>& es) const {
        RationalMatrix m(monomials.size(), es.size());
        for (size_t j = 0; j < es.size(); ++j)
            for (const auto& t : es[j].terms()) m.at(index.at(t.powers), j) = t.coeff;
        return m;
    }
};

// Expresses `target` in the span of `basis`, or returns nullopt.
inline std::optional<RationalMatrix> express_in_span(const std::vector<Expr>& basis,
                                                     const std::vector<Expr>& targets) {
    CoefficientTable table;
    for (const auto& b : basis) table.absorb(b);
    for (const auto& t : targets) table.absorb(t);
    table.freeze();
    RationalMatrix m = table.matrix(basis);
    RationalMatrix rhs = table.matrix(targets);
    auto sol = solve_exact(m, rhs);
    if (!sol) return std::nullopt;
    return sol->transpose();  // one row of coefficients per target
}

inline bool linearly_independent(const std::vector<Expr>& es) {
    CoefficientTable table;
    for (const auto& e : es) table.absorb(e);
    table.freeze();
    return rank(table.matrix(es)) == es.size();
}

}  // namespace detail

// Searches for a finite monomial dictionary closed under composition with h
// and containing the coordinates and every monomial of g. Closure gives the
// matrices of the lifted autonomous model:
//   basis(h(x2)) = a_bar * basis(x2),  col(x2, g(x2)) = c_bar * basis(x2).
inline ClosureResult closure_search(const std::vector<Expr>& h, const std::vector<Expr>& g,
                                    const std::vector<Symbol>& x2_symbols, size_t max_size,
                                    size_t max_degree) {
    for (const auto& e : h)
        if (e.has_functions()) throw NonPolynomialGenerator(e.to_string());
    for (const auto& e : g)
        if (e.has_functions()) throw NonPolynomialGenerator(e.to_string());

    std::set<detail::MonomialKey, detail::MonomialKeyLess> seen;
    std::vector<detail::MonomialKey> basis_keys;
    auto add_key = [&](const detail::MonomialKey& k) {
        if (seen.insert(k).second) basis_keys.push_back(k);
    };
    for (const auto& s : x2_symbols) add_key({{s, 1}});
    {
        std::vector<detail::MonomialKey> seed;
        for (const auto& e : g)
            for (auto& k : detail::monomial_keys(e))
                if (!seen.count(k)) seed.push_back(k);
        std::sort(seed.begin(), seed.end(), detail::MonomialKeyLess{});
        for (auto& k : seed) add_key(k);
    }

    std::map<std::string, Expr> binding;
    for (size_t i = 0; i < x2_symbols.size(); ++i) binding.emplace(x2_symbols[i].name, h[i]);

    auto reached_degree = [&] {
        int d = 0;
        for (const auto& k : basis_keys) d = std::max(d, detail::monomial_degree(k));
        return d;
    };

    // entries composed in earlier waves already have all their monomials in
    // the dictionary, so each wave only composes the newly added ones
    std::vector<Expr> composed;
    for (size_t wave = 0;; ++wave) {
        // the dictionary grows by at least one entry per wave
        if (wave > max_size + 1)
            throw std::logic_error("closure_search: wave count exceeded the size bound");
        std::set<detail::MonomialKey, detail::MonomialKeyLess> missing;
        for (size_t idx = composed.size(); idx < basis_keys.size(); ++idx) {
            Expr comp = detail::monomial_expr(basis_keys[idx]).substitute(binding);
            for (auto& ck : detail::monomial_keys(comp))
                if (!seen.count(ck)) missing.insert(ck);
            composed.push_back(std::move(comp));
        }

        if (missing.empty()) {
            std::vector<Expr> basis;
            basis.reserve(basis_keys.size());
            for (const auto& k : basis_keys) basis.push_back(detail::monomial_expr(k));

            auto a_rows = detail::express_in_span(basis, composed);
            std::vector<Expr> targets;
            for (const auto& s : x2_symbols) targets.push_back(Expr::symbol(s));
            targets.insert(targets.end(), g.begin(), g.end());
            auto c_rows = detail::express_in_span(basis, targets);
            if (!a_rows || !c_rows)
                throw std::logic_error("closure_search: closed dictionary failed to solve");
            if (!detail::linearly_independent(basis))
                throw std::logic_error("closure_search: dictionary entries not independent");
            return Closed{Dictionary{std::move(basis), x2_symbols, x2_symbols.size()},
                          std::move(*a_rows), std::move(*c_rows)};
        }

        bool over = basis_keys.size() + missing.size() > max_size;
        for (const auto& k : missing)
            if (detail::monomial_degree(k) > static_cast<int>(max_degree)) over = true;
        if (over) {
            std::vector<Expr> frontier;
            for (const auto& k : missing) frontier.push_back(detail::monomial_expr(k));
            return Unbounded{basis_keys.size(), reached_degree(), std::move(frontier)};
        }
        for (const auto& k : missing) add_key(k);
    }
}

inline ClosureResult closure_search(const CapStructure& cap, size_t max_size,
                                    size_t max_degree) {
    return closure_search(cap.h, cap.g, cap.x2_symbols(), max_size, max_degree);
}

// Assembles the full lifted model from a certified CAP structure and a
// closed dictionary for its autonomous part:
//   lifting = col(xt1, basis(xt2)) with xt = t x,
//   a_k = [c, g-rows of c_bar; 0, a_bar],  b_k = [d; 0],
//   c_k = t^-1 [I, 0; 0, x2-rows of c_bar].
inline KoopmanModel assemble_embedding(const SystemDef& sys, const CapStructure& cap,
                                       const Closed& closed) {
    size_t n1 = cap.n1, n2 = cap.n2;
    size_t nz_bar = closed.dictionary.basis.size();
    size_t m = sys.input_dim();
    if (closed.c_bar.rows() != n1 + n2 || closed.c_bar.cols() != nz_bar ||
        closed.a_bar.rows() != nz_bar || closed.a_bar.cols() != nz_bar)
        throw DimensionMismatch("assemble_embedding: closure blocks do not match the CAP");

    RationalMatrix x2_rows = closed.c_bar.block(0, 0, n2, nz_bar);
    RationalMatrix g_rows = closed.c_bar.block(n2, 0, n1, nz_bar);

    KoopmanModel model;
    model.states = sys.states;
    model.inputs = sys.inputs;
    model.exact = true;
    model.a_k = block_assemble(
        {{cap.c, g_rows}, {RationalMatrix::zeros(nz_bar, n1), closed.a_bar}});
    model.b_k = block_assemble({{cap.d}, {RationalMatrix::zeros(nz_bar, m)}});
    RationalMatrix inner = block_assemble(
        {{RationalMatrix::identity(n1), RationalMatrix::zeros(n1, nz_bar)},
         {RationalMatrix::zeros(n2, n1), x2_rows}});
    model.c_k = inverse(cap.t) * inner;

    // lifting written over the original states: xt_i = row_i(t) . x
    std::vector<Expr> tilde;
    tilde.reserve(cap.coords.size());
    for (size_t i = 0; i < cap.coords.size(); ++i)
        tilde.push_back(linear_combination(cap.t, i, sys.states));
    for (size_t i = 0; i < n1; ++i) model.lifting.push_back(tilde[i]);
    std::map<std::string, Expr> binding;
    for (size_t j = 0; j < n2; ++j) binding.emplace(cap.coords[n1 + j].name, tilde[n1 + j]);
    for (const auto& psi : closed.dictionary.basis)
        model.lifting.push_back(psi.substitute(binding));

    if (!detail::linearly_independent(model.lifting))
        throw std::logic_error("assemble_embedding: lifting entries not independent");
    return model;
}

// Exact symbolic check of both defining identities of the embedding.
inline bool verify_embedding(const SystemDef& sys, const KoopmanModel& model) {
    if (!model.exact)
        throw std::invalid_argument("verify_embedding: model must be exact-rational");
    size_t nz = model.lifted_dim();
    size_t n = sys.state_dim();
    size_t m = sys.input_dim();
    if (model.a_k.rows() != nz || model.a_k.cols() != nz || model.b_k.rows() != nz ||
        model.b_k.cols() != m || model.c_k.rows() != n || model.c_k.cols() != nz)
        return false;

    std::map<std::string, Expr> step;
    for (size_t i = 0; i < n; ++i) step.emplace(sys.states[i].name, sys.dynamics[i]);

    for (size_t i = 0; i < nz; ++i) {
        Expr lhs = model.lifting[i].substitute(step);
        Expr rhs;
        for (size_t j = 0; j < nz; ++j)
            if (model.a_k.at(i, j) != 0) rhs = rhs + model.lifting[j] * model.a_k.at(i, j);
        for (size_t l = 0; l < m; ++l)
            if (model.b_k.at(i, l) != 0)
                rhs = rhs + Expr::symbol(sys.inputs[l]) * model.b_k.at(i, l);
        if (!(lhs - rhs).is_zero()) return false;
    }
    for (size_t i = 0; i < n; ++i) {
        Expr rhs;
        for (size_t j = 0; j < nz; ++j)
            if (model.c_k.at(i, j) != 0) rhs = rhs + model.lifting[j] * model.c_k.at(i, j);
        if (!(Expr::symbol(sys.states[i]) - rhs).is_zero()) return false;
    }
    return true;
}

inline RationalMatrix observability_matrix(const KoopmanModel& model) {
    size_t nz = model.lifted_dim();
    std::vector<std::vector<RationalMatrix>> rows;
    RationalMatrix power = RationalMatrix::identity(nz);
    for (size_t i = 0; i < nz; ++i) {
        rows.push_back({model.c_k * power});
        power = power * model.a_k;
    }
    return block_assemble(rows);
}

inline bool is_observable(const KoopmanModel& model) {
    return rank(observability_matrix(model)) == model.lifted_dim();
}

// Kalman observability reduction over exact rationals. Observable models are
// returned unchanged; otherwise the unobservable coordinates are projected
// away and the reduced model keeps the same input-output behavior.
inline KoopmanModel observable_reduce(const KoopmanModel& model) {
    size_t nz = model.lifted_dim();
    RationalMatrix obs = observability_matrix(model);
    RrefResult rr = rref_with_transform(obs);
    size_t r = rr.pivot_cols.size();
    if (r == nz) return model;
    if (r == 0 && model.c_k.rows() > 0) throw StateNotReconstructible();

    RationalMatrix w = rr.rref.block(0, 0, r, nz);
    // complete the observable row space to an invertible transform
    RationalMatrix t = w;
    for (size_t i = 0; i < nz && t.rows() < nz; ++i) {
        RationalMatrix e(1, nz);
        e.at(0, i) = 1;
        RationalMatrix candidate = block_assemble({{t}, {e}});
        if (rank(candidate) == t.rows() + 1) t = candidate;
    }
    if (t.rows() != nz) throw std::logic_error("observable_reduce: completion failed");

    RationalMatrix t_inv = inverse(t);
    RationalMatrix a_hat = t * model.a_k * t_inv;
    RationalMatrix b_hat = t * model.b_k;
    RationalMatrix c_hat = model.c_k * t_inv;
    if (!a_hat.block(0, r, r, nz - r).is_zero() ||
        !c_hat.block(0, r, c_hat.rows(), nz - r).is_zero())
        throw std::logic_error("observable_reduce: decomposition blocks not triangular");

    KoopmanModel out;
    out.states = model.states;
    out.inputs = model.inputs;
    out.exact = model.exact;
    out.a_k = a_hat.block(0, 0, r, r);
    out.b_k = b_hat.block(0, 0, r, model.b_k.cols());
    out.c_k = c_hat.block(0, 0, c_hat.rows(), r);
    out.lifting = mat_apply(w, model.lifting);
    return out;
}

// Rewrites the lifting as col(x, psi_bar) where psi_bar has no degree-1
// monomials, via the two basis changes t1 (pull x to the front) and
// t2 = [I, 0; -C, I] (strip linear parts from the remainder).
inline KoopmanModel separate_lifting(const KoopmanModel& model) {
    if (!model.exact)
        throw std::invalid_argument("separate_lifting: model must be exact-rational");
    for (const auto& e : model.lifting)
        if (e.has_functions()) throw NonPolynomialGenerator(e.to_string());
    size_t nz = model.lifted_dim();
    size_t n = model.states.size();
    if (n > nz) throw StateNotInSpan(model.states.empty() ? "x" : model.states[0].name);

    std::vector<Expr> state_exprs;
    for (const auto& s : model.states) state_exprs.push_back(Expr::symbol(s));
    auto w_rows = detail::express_in_span(model.lifting, state_exprs);
    if (!w_rows) {
        for (size_t i = 0; i < n; ++i) {
            std::vector<Expr> single{state_exprs[i]};
            if (!detail::express_in_span(model.lifting, single))
                throw StateNotInSpan(model.states[i].name);
        }
        throw StateNotInSpan("x");
    }

    RationalMatrix t1 = *w_rows;  // n x nz, full row rank since states are independent
    for (size_t i = 0; i < nz && t1.rows() < nz; ++i) {
        RationalMatrix e(1, nz);
        e.at(0, i) = 1;
        RationalMatrix candidate = block_assemble({{t1}, {e}});
        if (rank(candidate) == t1.rows() + 1) t1 = candidate;
    }
    if (t1.rows() != nz) throw std::logic_error("separate_lifting: completion failed");

    std::vector<Expr> psi_tilde =
        mat_apply(t1.block(n, 0, nz - n, nz), model.lifting);
    RationalMatrix c_bar(nz - n, n);
    for (size_t i = 0; i < psi_tilde.size(); ++i)
        for (size_t j = 0; j < n; ++j)
            c_bar.at(i, j) = psi_tilde[i].coefficient({{model.states[j], 1}});

    RationalMatrix t2 = block_assemble(
        {{RationalMatrix::identity(n), RationalMatrix::zeros(n, nz - n)},
         {c_bar * Rational(-1), RationalMatrix::identity(nz - n)}});
    RationalMatrix t = t2 * t1;
    RationalMatrix t_inv = inverse(t);

    KoopmanModel out;
    out.states = model.states;
    out.inputs = model.inputs;
    out.exact = model.exact;
    out.a_k = t * model.a_k * t_inv;
    out.b_k = t * model.b_k;
    out.c_k = model.c_k * t_inv;
    out.lifting = mat_apply(t, model.lifting);

    for (size_t i = 0; i < n; ++i)
        if (!(out.lifting[i] - state_exprs[i]).is_zero())
            throw std::logic_error("separate_lifting: front block is not x");
    for (size_t i = n; i < nz; ++i)
        for (size_t j = 0; j < n; ++j)
            if (out.lifting[i].coefficient({{model.states[j], 1}}) != 0)
                throw std::logic_error("separate_lifting: linear term left in psi_bar");
    return out;
}

}  // namespace koopcert
