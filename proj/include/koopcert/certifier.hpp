#pragma once

#include <cassert>
#include <string>
#include <variant>
#include <vector>

#include "koopcert/affine.hpp"
#include "koopcert/system.hpp"

namespace koopcert {

// One-step split of the dynamics: f(x, u) == phi(x) + b * u.
struct OneStepForm {
    std::vector<Expr> phi;
    RationalMatrix b;  // n x m
};

// Where and why an affinity check failed. `component` names the offending
// entry of the stacked vector that was being decomposed.
struct AffinityWitness {
    int iteration = -1;
    size_t expr_index = 0;
    std::string component;
    Symbol symbol;
    Expr partial;
};

// Certified control-affine preserved structure: with xt := t * x the
// dynamics read
//   xt1+ = g(xt2) + c * xt1 + d * u
//   xt2+ = h(xt2)
// where xt1 stacks the first n1 transformed coordinates. n2 = 0 degenerates
// to an affine system with constant g.
struct CapStructure {
    RationalMatrix t;
    size_t n1 = 0, n2 = 0;
    RationalMatrix c;  // n1 x n1
    RationalMatrix d;  // n1 x m
    std::vector<Expr> g;
    std::vector<Expr> h;
    std::vector<Symbol> coords;  // the n transformed coordinates, xt1 block first

    std::vector<Symbol> x1_symbols() const {
        return {coords.begin(), coords.begin() + static_cast<long>(n1)};
    }
    std::vector<Symbol> x2_symbols() const {
        return {coords.begin() + static_cast<long>(n1), coords.end()};
    }
};

// Working state of one certification layer: the not-yet-certified tail
// subsystem together with the residual nonlinearities accumulated from the
// layers above it.
struct ScdState {
    std::vector<Expr> phi;
    RationalMatrix b;  // coefficient of the driving signal (inputs at layer 0)
    std::vector<Expr> gamma;
    std::vector<std::string> gamma_provenance;
    std::vector<Symbol> active;
    size_t layer = 0;
};

struct ScdCertified {
    size_t autonomous_dim;  // tail block size contributed to n2
};
struct ScdDecomposed {
    ScdState next;
    RationalMatrix t_bar;
    size_t split;  // rank of b; rows moved into the driven block
};
struct ScdFailed {
    AffinityWitness witness;
};
using ScdResult = std::variant<ScdCertified, ScdDecomposed, ScdFailed>;

struct IterationRecord {
    size_t index = 0;
    size_t subsystem_dim = 0;
    size_t b_rank = 0;
    int flag = 0;  // 0 decomposed, 1 certified, 2 failed
    std::string note;
};

struct Exists {
    CapStructure cap;
    std::vector<IterationRecord> iterations;
};
struct NotExists {
    size_t iteration = 0;
    AffinityWitness witness;
    std::vector<IterationRecord> iterations;
};
struct NotOneStep {
    AffinityWitness witness;
};
using CertificationOutcome = std::variant<Exists, NotExists, NotOneStep>;

using OneStepResult = std::variant<OneStepForm, NotOneStep>;

// Splits f(x, u) = phi(x) + B u, or reports the input whose partial is not
// constant.
inline OneStepResult extract_one_step(const SystemDef& sys) {
    if (sys.inputs.empty())
        return OneStepForm{sys.dynamics, RationalMatrix::zeros(sys.state_dim(), 0)};
    AffineResult r = affine_decompose(sys.dynamics, sys.inputs);
    if (auto* fail = std::get_if<NotAffine>(&r)) {
        AffinityWitness w{-1, fail->expr_index,
                          "dynamics of " + sys.states[fail->expr_index].name, fail->target,
                          fail->partial};
        return NotOneStep{std::move(w)};
    }
    auto& ok = std::get<AffineDecomposition>(r);
    return OneStepForm{std::move(ok.residual), std::move(ok.coeff)};
}

namespace detail {

inline std::vector<Symbol> fresh_layer_symbols(size_t layer, size_t count) {
    std::vector<Symbol> syms;
    syms.reserve(count);
    for (size_t i = 0; i < count; ++i) {
        // '~' is not part of the identifier grammar, so these can never
        // collide with user-declared names.
        syms.push_back({"x~" + std::to_string(layer) + "_" + std::to_string(i + 1),
                        SymbolKind::auxiliary, static_cast<int>(1000 + layer * 50 + i)});
    }
    return syms;
}

inline std::string component_name(const ScdState& state, size_t stacked_index) {
    if (stacked_index < state.phi.size())
        return "phi[" + std::to_string(stacked_index) + "]";
    size_t gi = stacked_index - state.phi.size();
    return state.gamma_provenance.size() > gi && !state.gamma_provenance[gi].empty()
               ? state.gamma_provenance[gi]
               : "gamma[" + std::to_string(gi) + "]";
}

}  // namespace detail

// One rank-and-affinity refinement step. Either the remaining subsystem is
// certified (input-driven block affine, or tail fully autonomous), or the
// nonlinearity is concentrated into a strictly smaller tail, or a
// non-constant partial derivative witnesses failure.
inline ScdResult scd(const ScdState& state) {
    size_t nhat = state.active.size();
    size_t r = rank(state.b);

    if (r == state.b.rows()) {
        // full row rank: the whole block must be affine for the structure to close
        std::vector<Expr> stacked = state.phi;
        stacked.insert(stacked.end(), state.gamma.begin(), state.gamma.end());
        AffineResult ar = affine_decompose(stacked, state.active);
        if (auto* fail = std::get_if<NotAffine>(&ar)) {
            AffinityWitness w{static_cast<int>(state.layer), fail->expr_index,
                              detail::component_name(state, fail->expr_index), fail->target,
                              fail->partial};
            return ScdFailed{std::move(w)};
        }
        return ScdCertified{0};
    }
    if (state.b.is_zero()) {
        // autonomous tail, arbitrary nonlinearity allowed
        return ScdCertified{nhat};
    }

    RowCompression rc = row_compress(state.b);
    std::vector<Symbol> fresh = detail::fresh_layer_symbols(state.layer + 1, nhat);
    RationalMatrix t_bar_inv = inverse(rc.t_bar);
    std::map<std::string, Expr> binding;
    for (size_t i = 0; i < nhat; ++i)
        binding.emplace(state.active[i].name, linear_combination(t_bar_inv, i, fresh));

    std::vector<Expr> transformed = mat_apply(rc.t_bar, substitute_all(state.phi, binding));
    std::vector<Expr> gamma_sub = substitute_all(state.gamma, binding);

    std::vector<Expr> stacked = transformed;
    stacked.insert(stacked.end(), gamma_sub.begin(), gamma_sub.end());
    std::vector<Symbol> x1_targets(fresh.begin(), fresh.begin() + static_cast<long>(rc.rank));
    AffineResult ar = affine_decompose(stacked, x1_targets);
    if (auto* fail = std::get_if<NotAffine>(&ar)) {
        AffinityWitness w{static_cast<int>(state.layer), fail->expr_index,
                          detail::component_name(state, fail->expr_index), fail->target,
                          fail->partial};
        return ScdFailed{std::move(w)};
    }
    auto& ok = std::get<AffineDecomposition>(ar);

    ScdState next;
    next.layer = state.layer + 1;
    next.active.assign(fresh.begin() + static_cast<long>(rc.rank), fresh.end());
    next.b = ok.coeff.block(rc.rank, 0, nhat - rc.rank, rc.rank);
    next.phi.assign(ok.residual.begin() + static_cast<long>(rc.rank),
                    ok.residual.begin() + static_cast<long>(nhat));
    // gamma* = col(gamma residuals, phi1): prior residuals first, then the
    // nonlinear part of the newly separated driven block
    next.gamma.assign(ok.residual.begin() + static_cast<long>(nhat), ok.residual.end());
    next.gamma_provenance = state.gamma_provenance;
    for (size_t i = 0; i < rc.rank; ++i) {
        next.gamma.push_back(ok.residual[i]);
        next.gamma_provenance.push_back("layer " + std::to_string(state.layer) + " phi1[" +
                                        std::to_string(i) + "]");
    }
    return ScdDecomposed{std::move(next), rc.t_bar, rc.rank};
}

namespace detail {

inline std::vector<Symbol> cap_coordinates(size_t n) {
    std::vector<Symbol> coords;
    coords.reserve(n);
    for (size_t i = 0; i < n; ++i)
        coords.push_back(
            {"x~" + std::to_string(i + 1), SymbolKind::auxiliary, static_cast<int>(100 + i)});
    return coords;
}

// Transforms the dynamics into coordinates xt = t * x:  t * f(t^-1 xt, u).
inline std::vector<Expr> transformed_dynamics(const SystemDef& sys, const RationalMatrix& t,
                                              const std::vector<Symbol>& coords) {
    RationalMatrix t_inv = inverse(t);
    std::map<std::string, Expr> binding;
    for (size_t i = 0; i < sys.state_dim(); ++i)
        binding.emplace(sys.states[i].name, linear_combination(t_inv, i, coords));
    return mat_apply(t, substitute_all(sys.dynamics, binding));
}

// Reads the CAP blocks off the transformed original system. The SCD loop
// guarantees the decomposition succeeds; failure here is a logic error.
inline CapStructure reconstruct_cap(const SystemDef& sys, const RationalMatrix& t, size_t n2) {
    size_t n = sys.state_dim();
    size_t m = sys.input_dim();
    size_t n1 = n - n2;
    CapStructure cap;
    cap.t = t;
    cap.n1 = n1;
    cap.n2 = n2;
    cap.coords = cap_coordinates(n);

    std::vector<Expr> ft = transformed_dynamics(sys, t, cap.coords);
    std::vector<Symbol> x1syms = cap.x1_symbols();
    std::vector<Symbol> x2syms = cap.x2_symbols();

    if (n1 > 0) {
        std::vector<Symbol> targets = x1syms;
        targets.insert(targets.end(), sys.inputs.begin(), sys.inputs.end());
        std::vector<Expr> top(ft.begin(), ft.begin() + static_cast<long>(n1));
        AffineResult ar = affine_decompose(top, targets);
        auto* ok = std::get_if<AffineDecomposition>(&ar);
        if (!ok) throw std::logic_error("reconstruct_cap: driven block not affine");
        cap.c = ok->coeff.block(0, 0, n1, n1);
        cap.d = ok->coeff.block(0, n1, n1, m);
        cap.g = ok->residual;
    } else {
        cap.c = RationalMatrix::zeros(0, 0);
        cap.d = RationalMatrix::zeros(0, m);
    }
    cap.h.assign(ft.begin() + static_cast<long>(n1), ft.end());

    for (const auto& e : cap.g)
        for (const auto& s : x1syms)
            if (e.contains(s)) throw std::logic_error("reconstruct_cap: g depends on xt1");
    for (const auto& e : cap.h) {
        for (const auto& s : x1syms)
            if (e.contains(s)) throw std::logic_error("reconstruct_cap: h depends on xt1");
        for (const auto& s : sys.inputs)
            if (e.contains(s)) throw std::logic_error("reconstruct_cap: h depends on an input");
    }
    return cap;
}

}  // namespace detail

// Checks the CAP identity t * f(t^-1 xt, u) == [g + c xt1 + d u; h] exactly,
// plus the variable constraints on g and h.
inline bool cap_verify(const SystemDef& sys, const CapStructure& cap) {
    size_t n = sys.state_dim();
    size_t m = sys.input_dim();
    if (cap.t.rows() != n || cap.t.cols() != n || cap.n1 + cap.n2 != n ||
        cap.c.rows() != cap.n1 || cap.c.cols() != cap.n1 || cap.d.rows() != cap.n1 ||
        cap.d.cols() != m || cap.g.size() != cap.n1 || cap.h.size() != cap.n2 ||
        cap.coords.size() != n)
        throw DimensionMismatch("cap_verify: inconsistent CAP dimensions");

    std::vector<Expr> ft = detail::transformed_dynamics(sys, cap.t, cap.coords);
    std::vector<Symbol> x1syms = cap.x1_symbols();

    for (const auto* block : {&cap.g, &cap.h})
        for (const auto& e : *block) {
            for (const auto& s : x1syms)
                if (e.contains(s)) return false;
            for (const auto& s : sys.inputs)
                if (e.contains(s)) return false;
        }

    for (size_t i = 0; i < cap.n1; ++i) {
        Expr expected = cap.g[i];
        for (size_t j = 0; j < cap.n1; ++j)
            expected = expected + Expr::symbol(cap.coords[j]) * cap.c.at(i, j);
        for (size_t l = 0; l < m; ++l)
            expected = expected + Expr::symbol(sys.inputs[l]) * cap.d.at(i, l);
        if (!(ft[i] - expected).is_zero()) return false;
    }
    for (size_t i = 0; i < cap.n2; ++i)
        if (!(ft[cap.n1 + i] - cap.h[i]).is_zero()) return false;
    return true;
}

// Full certification loop: one-step extraction, then repeated SCD until the
// structure is certified or a witness refutes it. Terminates in at most n
// iterations.
inline CertificationOutcome certify(const SystemDef& sys) {
    OneStepResult one = extract_one_step(sys);
    if (auto* fail = std::get_if<NotOneStep>(&one)) return *fail;
    auto& form = std::get<OneStepForm>(one);

    size_t n = sys.state_dim();
    ScdState state{form.phi, form.b, {}, {}, sys.states, 0};
    RationalMatrix t_total = RationalMatrix::identity(n);
    std::vector<IterationRecord> records;
    size_t n2 = 0;

    for (size_t iter = 0;; ++iter) {
        if (iter > n) throw std::logic_error("certify: iteration bound n exceeded");
        IterationRecord rec;
        rec.index = iter;
        rec.subsystem_dim = state.active.size();
        rec.b_rank = rank(state.b);

        ScdResult result = scd(state);
        if (auto* cert = std::get_if<ScdCertified>(&result)) {
            rec.flag = 1;
            rec.note = cert->autonomous_dim == 0
                           ? "driving matrix has full row rank and the block is affine"
                           : "driving matrix is zero; autonomous tail of dimension " +
                                 std::to_string(cert->autonomous_dim);
            records.push_back(rec);
            n2 = cert->autonomous_dim;
            break;
        }
        if (auto* fail = std::get_if<ScdFailed>(&result)) {
            rec.flag = 2;
            rec.note = "non-constant partial of " + fail->witness.component + " in " +
                       fail->witness.symbol.name;
            records.push_back(rec);
            return NotExists{iter, fail->witness, records};
        }
        auto& dec = std::get<ScdDecomposed>(result);
        rec.flag = 0;
        rec.note = "rank " + std::to_string(dec.split) + " driven block separated; tail dimension " +
                   std::to_string(dec.next.active.size());
        records.push_back(rec);
        t_total =
            blockdiag(RationalMatrix::identity(n - state.active.size()), dec.t_bar) * t_total;
        state = std::move(dec.next);
    }

    CapStructure cap = detail::reconstruct_cap(sys, t_total, n2);
    if (!cap_verify(sys, cap))
        throw std::logic_error("certify: reconstructed CAP failed verification");
    return Exists{std::move(cap), std::move(records)};
}

}  // namespace koopcert
