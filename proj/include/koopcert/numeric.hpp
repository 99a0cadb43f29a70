#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "koopcert/koopman.hpp"

namespace koopcert {

struct NonFiniteState : std::runtime_error {
    explicit NonFiniteState(size_t step)
        : std::runtime_error("state became non-finite at step " + std::to_string(step)),
          step(step) {}
    size_t step;
};
struct LengthMismatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct EmptyData : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Sampled rollout: states.size() == inputs.size() + 1.
struct Trajectory {
    std::vector<std::vector<double>> states;
    std::vector<std::vector<double>> inputs;

    size_t horizon() const { return inputs.size(); }
};

inline std::vector<double> eval_vector(const std::vector<Expr>& es,
                                       const std::map<std::string, double>& values) {
    std::vector<double> out;
    out.reserve(es.size());
    for (const auto& e : es) out.push_back(e.eval_double(values));
    return out;
}

inline Eigen::MatrixXd to_eigen(const RationalMatrix& m) {
    Eigen::MatrixXd out(m.rows(), m.cols());
    for (size_t r = 0; r < m.rows(); ++r)
        for (size_t c = 0; c < m.cols(); ++c) out(static_cast<long>(r), static_cast<long>(c)) = to_double(m.at(r, c));
    return out;
}

namespace detail {

// Numeric evaluation of an expression in its written (factored) form. The
// expanded canonical polynomial can lose many digits to cancellation when
// states get large, so simulation evaluates the source text when available.
class SourceEvaluator {
public:
    SourceEvaluator(const std::string& text, const std::map<std::string, double>& vars)
        : text_(text), vars_(vars) {}

    double run() {
        double v = expr();
        skip_ws();
        if (pos_ < text_.size())
            throw std::invalid_argument("numeric evaluation: trailing input in " + text_);
        return v;
    }

private:
    double expr() {
        skip_ws();
        double sign = 1.0;
        if (peek() == '+' || peek() == '-') {
            if (text_[pos_] == '-') sign = -1.0;
            ++pos_;
        }
        double acc = sign * term();
        while (true) {
            skip_ws();
            char c = peek();
            if (c != '+' && c != '-') break;
            ++pos_;
            double rhs = term();
            acc = c == '+' ? acc + rhs : acc - rhs;
        }
        return acc;
    }
    double term() {
        double acc = factor();
        while (true) {
            skip_ws();
            if (peek() != '*') break;
            ++pos_;
            acc *= factor();
        }
        return acc;
    }
    double factor() {
        double base = atom();
        skip_ws();
        if (peek() != '^') return base;
        ++pos_;
        skip_ws();
        size_t start = pos_;
        while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
        return std::pow(base, std::stoi(text_.substr(start, pos_ - start)));
    }
    double atom() {
        skip_ws();
        char c = peek();
        if (c == '(') {
            ++pos_;
            double v = expr();
            expect(')');
            return v;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            size_t start = pos_;
            while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
            if (peek() == '.') {
                ++pos_;
                while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
            } else if (peek() == '/' && pos_ + 1 < text_.size() &&
                       std::isdigit(static_cast<unsigned char>(text_[pos_ + 1]))) {
                ++pos_;
                while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
                std::string lit = text_.substr(start, pos_ - start);
                auto slash = lit.find('/');
                return std::stod(lit.substr(0, slash)) / std::stod(lit.substr(slash + 1));
            }
            return std::stod(text_.substr(start, pos_ - start));
        }
        size_t start = pos_;
        while (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_') ++pos_;
        std::string name = text_.substr(start, pos_ - start);
        if (name == "sin" || name == "cos" || name == "exp") {
            expect('(');
            double arg = expr();
            expect(')');
            if (name == "sin") return std::sin(arg);
            if (name == "cos") return std::cos(arg);
            return std::exp(arg);
        }
        auto it = vars_.find(name);
        if (it == vars_.end())
            throw std::invalid_argument("numeric evaluation: unknown symbol " + name);
        return it->second;
    }
    void expect(char c) {
        skip_ws();
        if (peek() != c)
            throw std::invalid_argument("numeric evaluation: expected '" + std::string(1, c) +
                                        "' in " + text_);
        ++pos_;
    }
    char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }
    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    const std::string& text_;
    const std::map<std::string, double>& vars_;
    size_t pos_ = 0;
};

}  // namespace detail

inline Trajectory simulate_nonlinear(const SystemDef& sys, const std::vector<double>& x0,
                                     const std::vector<std::vector<double>>& inputs) {
    if (x0.size() != sys.state_dim())
        throw DimensionMismatch("simulate_nonlinear: x0 size mismatch");
    bool from_source = sys.dynamics_source.size() == sys.dynamics.size();
    Trajectory traj;
    traj.states.push_back(x0);
    for (size_t t = 0; t < inputs.size(); ++t) {
        if (inputs[t].size() != sys.input_dim())
            throw DimensionMismatch("simulate_nonlinear: input size mismatch at step " +
                                    std::to_string(t));
        std::map<std::string, double> values;
        for (size_t i = 0; i < sys.state_dim(); ++i)
            values[sys.states[i].name] = traj.states.back()[i];
        for (size_t j = 0; j < sys.input_dim(); ++j) values[sys.inputs[j].name] = inputs[t][j];
        std::vector<double> next(sys.state_dim());
        for (size_t i = 0; i < sys.state_dim(); ++i)
            next[i] = from_source
                          ? detail::SourceEvaluator(sys.dynamics_source[i], values).run()
                          : sys.dynamics[i].eval_double(values);
        for (double v : next)
            if (!std::isfinite(v)) throw NonFiniteState(t + 1);
        traj.states.push_back(std::move(next));
        traj.inputs.push_back(inputs[t]);
    }
    return traj;
}

// Lifts the initial condition exactly (z0 = lifting(x0)), then rolls the
// linear model and reads states back through c_k.
inline Trajectory simulate_koopman(const KoopmanModel& model, const std::vector<double>& x0,
                                   const std::vector<std::vector<double>>& inputs) {
    size_t n = model.c_k.rows();
    size_t m = model.b_k.cols();
    if (x0.size() != n) throw DimensionMismatch("simulate_koopman: x0 size mismatch");

    std::map<std::string, double> values;
    for (size_t i = 0; i < n; ++i) values[model.states[i].name] = x0[i];
    Eigen::VectorXd z(model.lifted_dim());
    for (size_t i = 0; i < model.lifted_dim(); ++i)
        z(static_cast<long>(i)) = model.lifting[i].eval_double(values);

    Eigen::MatrixXd a = to_eigen(model.a_k);
    Eigen::MatrixXd b = to_eigen(model.b_k);
    Eigen::MatrixXd c = to_eigen(model.c_k);

    Trajectory traj;
    auto read_state = [&](const Eigen::VectorXd& zz) {
        Eigen::VectorXd x = c * zz;
        std::vector<double> out(x.data(), x.data() + x.size());
        for (double v : out)
            if (!std::isfinite(v)) throw NonFiniteState(traj.states.size());
        return out;
    };
    traj.states.push_back(read_state(z));
    for (size_t t = 0; t < inputs.size(); ++t) {
        if (inputs[t].size() != m)
            throw DimensionMismatch("simulate_koopman: input size mismatch at step " +
                                    std::to_string(t));
        Eigen::VectorXd u(m);
        for (size_t j = 0; j < m; ++j) u(static_cast<long>(j)) = inputs[t][j];
        z = a * z + b * u;
        traj.states.push_back(read_state(z));
        traj.inputs.push_back(inputs[t]);
    }
    return traj;
}

struct CompareReport {
    double max_abs = 0.0;
    double max_rel = 0.0;
    bool pass = true;
};

// Componentwise closeness: an entry passes when
// |a - b| <= tol_abs + tol_rel * max(|a|, |b|).
inline CompareReport compare(const Trajectory& a, const Trajectory& b, double tol_abs,
                             double tol_rel) {
    if (a.states.size() != b.states.size())
        throw LengthMismatch("compare: trajectories have different lengths");
    CompareReport rep;
    for (size_t t = 0; t < a.states.size(); ++t) {
        if (a.states[t].size() != b.states[t].size())
            throw LengthMismatch("compare: state dimension mismatch at step " + std::to_string(t));
        for (size_t i = 0; i < a.states[t].size(); ++i) {
            double av = a.states[t][i], bv = b.states[t][i];
            double diff = std::abs(av - bv);
            double scale = std::max(std::abs(av), std::abs(bv));
            rep.max_abs = std::max(rep.max_abs, diff);
            if (scale > 0) rep.max_rel = std::max(rep.max_rel, diff / scale);
            if (diff > tol_abs + tol_rel * scale) rep.pass = false;
        }
    }
    return rep;
}

// Least-squares fit of the lifted dynamics from one trajectory (controlled
// EDMD). Solves  min ||Z+ - [A B] [Z; U]||_F  and  min ||X - C Z||_F  with
// a complete orthogonal decomposition, which yields the minimum-norm
// solution when the data is rank-deficient.
struct EdmdFit {
    Eigen::MatrixXd a;
    Eigen::MatrixXd b;  // 0 columns for autonomous data
    Eigen::MatrixXd c;
    double residual_dynamics = 0.0;
    double residual_output = 0.0;
    double condition_number = 0.0;
    bool rank_warning = false;
};

inline EdmdFit edmd_fit(const Trajectory& traj, const std::vector<Expr>& lifting,
                        const std::vector<Symbol>& state_symbols,
                        const std::vector<Symbol>& input_symbols) {
    if (traj.states.size() < 2) throw EmptyData("edmd_fit: need at least two states");
    size_t samples = traj.states.size() - 1;
    size_t nz = lifting.size();
    size_t n = state_symbols.size();
    size_t m = input_symbols.size();

    Eigen::MatrixXd z(nz, samples), zplus(nz, samples), x(n, samples), u(m, samples);
    for (size_t t = 0; t < samples + 1; ++t) {
        std::map<std::string, double> values;
        for (size_t i = 0; i < n; ++i) values[state_symbols[i].name] = traj.states[t][i];
        std::vector<double> lifted = eval_vector(lifting, values);
        for (size_t i = 0; i < nz; ++i) {
            if (t < samples) z(static_cast<long>(i), static_cast<long>(t)) = lifted[i];
            if (t > 0) zplus(static_cast<long>(i), static_cast<long>(t - 1)) = lifted[i];
        }
        if (t < samples) {
            for (size_t i = 0; i < n; ++i) x(static_cast<long>(i), static_cast<long>(t)) = traj.states[t][i];
            for (size_t j = 0; j < m; ++j) u(static_cast<long>(j), static_cast<long>(t)) = traj.inputs[t][j];
        }
    }

    Eigen::MatrixXd s(nz + m, samples);
    s.topRows(nz) = z;
    if (m > 0) s.bottomRows(m) = u;

    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(s.transpose());
    Eigen::MatrixXd ab = cod.solve(zplus.transpose()).transpose();

    EdmdFit fit;
    fit.a = ab.leftCols(nz);
    fit.b = ab.rightCols(m);
    fit.residual_dynamics = (zplus - ab * s).norm();
    fit.rank_warning = static_cast<size_t>(cod.rank()) < nz + m;

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(s);
    double smin = svd.singularValues().size() > 0
                      ? svd.singularValues()(svd.singularValues().size() - 1)
                      : 0.0;
    fit.condition_number = smin > 0 ? svd.singularValues()(0) / smin
                                    : std::numeric_limits<double>::infinity();

    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> codz(z.transpose());
    fit.c = codz.solve(x.transpose()).transpose();
    fit.residual_output = (x - fit.c * z).norm();
    return fit;
}

// CSV export: header `t,x1,...,xn,u1,...,um`, one row per state sample,
// input columns left blank on the final row.
inline void write_csv(std::ostream& os, const Trajectory& traj,
                      const std::vector<Symbol>& state_symbols,
                      const std::vector<Symbol>& input_symbols) {
    os << "t";
    for (const auto& s : state_symbols) os << "," << s.name;
    for (const auto& s : input_symbols) os << "," << s.name;
    os << "\n";
    os.precision(17);
    for (size_t t = 0; t < traj.states.size(); ++t) {
        os << t;
        for (double v : traj.states[t]) os << "," << v;
        for (size_t j = 0; j < input_symbols.size(); ++j) {
            os << ",";
            if (t < traj.inputs.size()) os << traj.inputs[t][j];
        }
        os << "\n";
    }
}

inline void write_csv_file(const std::string& path, const Trajectory& traj,
                           const std::vector<Symbol>& state_symbols,
                           const std::vector<Symbol>& input_symbols) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open CSV output file: " + path);
    write_csv(os, traj, state_symbols, input_symbols);
}

// Seedable uniform input sequence on a box, recorded in reports so runs can
// be reproduced exactly.
inline std::vector<std::vector<double>> random_inputs(size_t horizon, size_t m, uint64_t seed,
                                                      double lo = -1.0, double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<std::vector<double>> inputs(horizon, std::vector<double>(m));
    for (auto& row : inputs)
        for (auto& v : row) v = dist(rng);
    return inputs;
}

}  // namespace koopcert
