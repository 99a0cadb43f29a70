#pragma once

#include <string>
#include <variant>
#include <vector>

#include "koopcert/koopman.hpp"

namespace koopcert {

struct ExpressionBlowup : std::runtime_error {
    ExpressionBlowup(size_t term_count, size_t cap)
        : std::runtime_error("composition exceeded the term cap: " + std::to_string(term_count) +
                             " terms, cap " + std::to_string(cap)),
          term_count(term_count),
          cap(cap) {}
    size_t term_count;
    size_t cap;
};

inline constexpr size_t kDefaultTermCap = 1'000'000;

// Per-step copies of the input symbols for an N-step composition, named
// <input><step> (u0, u1, ...). The system parser rejects user identifiers of
// that shape, so the names are collision-free.
inline std::vector<Symbol> step_input_symbols(const SystemDef& sys, size_t horizon) {
    std::vector<Symbol> syms;
    syms.reserve(horizon * sys.input_dim());
    for (size_t t = 0; t < horizon; ++t)
        for (size_t j = 0; j < sys.input_dim(); ++j)
            syms.push_back({sys.inputs[j].name + std::to_string(t), SymbolKind::input,
                            static_cast<int>(10000 + t * 100 + j)});
    return syms;
}

// Exact symbolic state after N steps, over the initial state and the
// per-step inputs u0 .. u_{N-1}.
inline std::vector<Expr> compose(const SystemDef& sys, size_t horizon,
                                 size_t term_cap = kDefaultTermCap) {
    if (horizon < 1) throw std::invalid_argument("compose: horizon must be >= 1");
    std::vector<Symbol> steps = step_input_symbols(sys, horizon);
    std::vector<Expr> state;
    for (const auto& s : sys.states) state.push_back(Expr::symbol(s));
    for (size_t t = 0; t < horizon; ++t) {
        std::map<std::string, Expr> binding;
        for (size_t i = 0; i < sys.state_dim(); ++i)
            binding.emplace(sys.states[i].name, state[i]);
        for (size_t j = 0; j < sys.input_dim(); ++j)
            binding.emplace(sys.inputs[j].name,
                            Expr::symbol(steps[t * sys.input_dim() + j]));
        state = substitute_all(sys.dynamics, binding);
        size_t count = total_term_count(state);
        if (count > term_cap) throw ExpressionBlowup(count, term_cap);
    }
    return state;
}

// N-step linear predictor x(N) = phi_n(x) + b_n * col(u0, ..., u_{N-1}).
struct NStepForm {
    size_t horizon = 0;
    std::vector<Expr> phi_n;
    RationalMatrix b_n;  // n x (N*m)
    std::vector<Symbol> step_inputs;
};

using NStepResult = std::variant<NStepForm, NotAffine>;

inline NStepResult n_step_predictor(const SystemDef& sys, size_t horizon,
                                    size_t term_cap = kDefaultTermCap) {
    std::vector<Expr> composed = compose(sys, horizon, term_cap);
    if (sys.input_dim() == 0)
        return NStepForm{horizon, std::move(composed),
                         RationalMatrix::zeros(sys.state_dim(), 0), {}};
    std::vector<Symbol> steps = step_input_symbols(sys, horizon);
    AffineResult r = affine_decompose(composed, steps);
    if (auto* fail = std::get_if<NotAffine>(&r)) return *fail;
    auto& ok = std::get<AffineDecomposition>(r);
    return NStepForm{horizon, std::move(ok.residual), std::move(ok.coeff), std::move(steps)};
}

namespace detail {

inline bool predictor_identity_holds(const SystemDef& sys, const KoopmanModel& model,
                                     const std::vector<Expr>& composed, size_t horizon,
                                     const std::vector<RationalMatrix>& a_powers,
                                     const std::vector<Symbol>& steps) {
    size_t m = sys.input_dim();
    std::vector<Expr> predicted = mat_apply(model.c_k * a_powers[horizon], model.lifting);
    for (size_t t = 0; t < horizon; ++t) {
        RationalMatrix gain = model.c_k * a_powers[horizon - 1 - t] * model.b_k;
        for (size_t i = 0; i < predicted.size(); ++i)
            for (size_t l = 0; l < m; ++l)
                if (gain.at(i, l) != 0)
                    predicted[i] = predicted[i] + Expr::symbol(steps[t * m + l]) * gain.at(i, l);
    }
    for (size_t i = 0; i < composed.size(); ++i)
        if (!(composed[i] - predicted[i]).is_zero()) return false;
    return true;
}

}  // namespace detail

// Checks that the lifted linear model reproduces the exact N-step
// composition:  c (a^N lifting(x) + sum_i a^(N-1-i) b u_i) == x(N).
inline bool koopman_predictor_check(const SystemDef& sys, const KoopmanModel& model,
                                    size_t horizon, size_t term_cap = kDefaultTermCap) {
    if (!model.exact)
        throw std::invalid_argument("koopman_predictor_check: model must be exact-rational");
    std::vector<Expr> composed = compose(sys, horizon, term_cap);
    std::vector<Symbol> steps = step_input_symbols(sys, horizon);
    std::vector<RationalMatrix> powers{RationalMatrix::identity(model.lifted_dim())};
    for (size_t i = 0; i < horizon; ++i) powers.push_back(model.a_k * powers.back());
    return detail::predictor_identity_holds(sys, model, composed, horizon, powers, steps);
}

// Same check for every horizon 1..max_horizon, composing the dynamics once
// and testing after each step.
inline bool koopman_predictor_check_upto(const SystemDef& sys, const KoopmanModel& model,
                                         size_t max_horizon,
                                         size_t term_cap = kDefaultTermCap) {
    if (!model.exact)
        throw std::invalid_argument("koopman_predictor_check: model must be exact-rational");
    std::vector<Symbol> steps = step_input_symbols(sys, max_horizon);
    std::vector<RationalMatrix> powers{RationalMatrix::identity(model.lifted_dim())};
    for (size_t i = 0; i < max_horizon; ++i) powers.push_back(model.a_k * powers.back());

    std::vector<Expr> state;
    for (const auto& s : sys.states) state.push_back(Expr::symbol(s));
    for (size_t t = 0; t < max_horizon; ++t) {
        std::map<std::string, Expr> binding;
        for (size_t i = 0; i < sys.state_dim(); ++i)
            binding.emplace(sys.states[i].name, state[i]);
        for (size_t j = 0; j < sys.input_dim(); ++j)
            binding.emplace(sys.inputs[j].name, Expr::symbol(steps[t * sys.input_dim() + j]));
        state = substitute_all(sys.dynamics, binding);
        size_t count = total_term_count(state);
        if (count > term_cap) throw ExpressionBlowup(count, term_cap);
        if (!detail::predictor_identity_holds(sys, model, state, t + 1, powers, steps))
            return false;
    }
    return true;
}

}  // namespace koopcert
