#pragma once

#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "koopcert/numeric.hpp"
#include "koopcert/predictor.hpp"
#include "koopcert/report.hpp"
#include "koopcert/version.hpp"

namespace koopcert {

// Exit codes shared by every subcommand:
//   0 success / structure exists
//   1 certified nonexistent (or verification failed)
//   2 inconclusive within the configured bounds
//   3 usage or input error
enum ExitCode : int {
    kExitSuccess = 0,
    kExitNotExists = 1,
    kExitInconclusive = 2,
    kExitUsage = 3,
};

struct CliResult {
    int exit_code = kExitSuccess;
    Json report;
    std::string human;
};

struct EmbedOptions {
    size_t max_size = 64;
    size_t max_degree = 16;
};

struct SimulateOptions {
    std::vector<double> x0;
    size_t horizon = 50;
    uint64_t seed = 0;
    bool random_inputs = false;
    std::optional<std::string> inputs_text;  // "u11,u12;u21,u22;..."
    std::optional<std::string> csv_path;
    double tol_abs = 1e-9;
    double tol_rel = 1e-9;
    EmbedOptions embed;
};

struct EdmdOptions {
    std::string lifting_text;
    std::vector<double> x0;
    size_t samples = 500;
    uint64_t seed = 0;
};

namespace cli_detail {

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double elapsed_ms() const {
        auto d = std::chrono::steady_clock::now() - start_;
        return std::chrono::duration<double, std::milli>(d).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

inline constexpr const char* kAssumptionNote =
    "identities are certified globally as formal polynomial identities; openness/convexity of "
    "the state space and surjectivity of the dynamics are assumed, not verified";

inline Json report_header(const std::string& command, const std::string& input) {
    Json report;
    report["tool"] = kToolName;
    report["version"] = kToolVersion;
    report["command"] = command;
    report["input"] = input;
    return report;
}

inline CliResult input_error(const std::string& command, const std::string& input,
                             const std::string& message) {
    CliResult res;
    res.exit_code = kExitUsage;
    res.report = report_header(command, input);
    res.report["verdict"] = "error";
    res.report["message"] = message;
    res.human = "error: " + message + "\n";
    return res;
}

inline std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) throw std::invalid_argument("empty entry in list: " + text);
        out.push_back(std::stod(item));
    }
    return out;
}

inline std::vector<std::vector<double>> parse_input_sequence(const std::string& text, size_t m) {
    std::vector<std::vector<double>> out;
    std::stringstream ss(text);
    std::string step;
    while (std::getline(ss, step, ';')) {
        auto row = parse_double_list(step);
        if (row.size() != m)
            throw std::invalid_argument("input step has " + std::to_string(row.size()) +
                                        " entries, expected " + std::to_string(m));
        out.push_back(std::move(row));
    }
    return out;
}

inline void describe_cap(std::ostream& os, const CapStructure& cap) {
    os << "n1 = " << cap.n1 << ", n2 = " << cap.n2 << "\n";
    os << "T          = " << matrix_to_text(cap.t) << "\n";
    os << "T (float)  = " << matrix_to_float_text(cap.t) << "\n";
    os << "C          = " << matrix_to_text(cap.c) << "\n";
    os << "D          = " << matrix_to_text(cap.d) << "\n";
    os << "g          = [";
    for (size_t i = 0; i < cap.g.size(); ++i) os << (i ? ", " : "") << cap.g[i].to_string();
    os << "]\n";
    os << "h          = [";
    for (size_t i = 0; i < cap.h.size(); ++i) os << (i ? ", " : "") << cap.h[i].to_string();
    os << "]\n";
}

inline void describe_model(std::ostream& os, const KoopmanModel& model) {
    os << "n_z = " << model.lifted_dim() << "\n";
    os << "lifting:\n";
    for (const auto& e : model.lifting) os << "  " << e.to_string() << "\n";
    os << "A_K         = " << matrix_to_text(model.a_k) << "\n";
    os << "A_K (float) = " << matrix_to_float_text(model.a_k) << "\n";
    os << "B_K         = " << matrix_to_text(model.b_k) << "\n";
    os << "B_K (float) = " << matrix_to_float_text(model.b_k) << "\n";
    os << "C_K         = " << matrix_to_text(model.c_k) << "\n";
    os << "C_K (float) = " << matrix_to_float_text(model.c_k) << "\n";
}

inline void describe_iterations(std::ostream& os, const std::vector<IterationRecord>& records) {
    os << "iterations:\n";
    for (const auto& r : records)
        os << "  [" << r.index << "] dim " << r.subsystem_dim << ", rank " << r.b_rank
           << ", flag " << r.flag << ": " << r.note << "\n";
}

inline void describe_witness(std::ostream& os, const AffinityWitness& w) {
    os << "witness: at iteration " << w.iteration << ", " << w.component << " has non-constant"
       << " partial in " << w.symbol.name << ": " << w.partial.to_string() << "\n";
}

}  // namespace cli_detail

inline CliResult run_certify(const std::string& path) {
    cli_detail::Stopwatch timer;
    CliResult res;
    res.report = cli_detail::report_header("certify", path);
    std::ostringstream human;

    SystemDef sys;
    try {
        sys = parse_system_file(path);
    } catch (const std::exception& e) {
        return cli_detail::input_error("certify", path, e.what());
    }

    CertificationOutcome outcome = certify(sys);
    if (auto* ex = std::get_if<Exists>(&outcome)) {
        res.exit_code = kExitSuccess;
        res.report["verdict"] = "exists";
        res.report["assumptions"] = cli_detail::kAssumptionNote;
        res.report["transformation"] = matrix_json(ex->cap.t);
        res.report["cap"] = cap_json(ex->cap);
        res.report["cap_verified"] = true;
        res.report["iterations"] = iterations_json(ex->iterations);
        human << "verdict: an infinite-step linear predictor exists (CAP structure found)\n";
        human << "note: " << cli_detail::kAssumptionNote << "\n";
        cli_detail::describe_cap(human, ex->cap);
        cli_detail::describe_iterations(human, ex->iterations);
    } else if (auto* ne = std::get_if<NotExists>(&outcome)) {
        res.exit_code = kExitNotExists;
        res.report["verdict"] = "not_exists";
        res.report["failed_iteration"] = ne->iteration;
        res.report["witness"] = witness_json(ne->witness);
        res.report["iterations"] = iterations_json(ne->iterations);
        human << "verdict: no infinite-step linear predictor exists\n";
        cli_detail::describe_witness(human, ne->witness);
        cli_detail::describe_iterations(human, ne->iterations);
    } else {
        auto& no = std::get<NotOneStep>(outcome);
        res.exit_code = kExitNotExists;
        res.report["verdict"] = "not_one_step";
        res.report["witness"] = witness_json(no.witness);
        human << "verdict: the dynamics are not affine in the inputs (no one-step linear"
              << " predictor)\n";
        cli_detail::describe_witness(human, no.witness);
    }
    res.report["timing_ms"] = timer.elapsed_ms();
    res.human = human.str();
    return res;
}

inline CliResult run_embed(const std::string& path, const EmbedOptions& opts) {
    cli_detail::Stopwatch timer;
    CliResult res;
    res.report = cli_detail::report_header("embed", path);
    res.report["bounds"] = Json{{"max_size", opts.max_size}, {"max_degree", opts.max_degree}};
    std::ostringstream human;

    SystemDef sys;
    try {
        sys = parse_system_file(path);
    } catch (const std::exception& e) {
        return cli_detail::input_error("embed", path, e.what());
    }

    CertificationOutcome outcome = certify(sys);
    if (auto* ne = std::get_if<NotExists>(&outcome)) {
        res.exit_code = kExitNotExists;
        res.report["verdict"] = "not_exists";
        res.report["witness"] = witness_json(ne->witness);
        res.report["iterations"] = iterations_json(ne->iterations);
        human << "verdict: no Koopman linear embedding (no CAP structure)\n";
        cli_detail::describe_witness(human, ne->witness);
        res.report["timing_ms"] = timer.elapsed_ms();
        res.human = human.str();
        return res;
    }
    if (auto* no = std::get_if<NotOneStep>(&outcome)) {
        res.exit_code = kExitNotExists;
        res.report["verdict"] = "not_one_step";
        res.report["witness"] = witness_json(no->witness);
        human << "verdict: no Koopman linear embedding (dynamics not affine in inputs)\n";
        cli_detail::describe_witness(human, no->witness);
        res.report["timing_ms"] = timer.elapsed_ms();
        res.human = human.str();
        return res;
    }

    auto& ex = std::get<Exists>(outcome);
    res.report["assumptions"] = cli_detail::kAssumptionNote;
    res.report["transformation"] = matrix_json(ex.cap.t);
    res.report["cap"] = cap_json(ex.cap);
    res.report["iterations"] = iterations_json(ex.iterations);

    ClosureResult closure = Unbounded{};
    try {
        closure = closure_search(ex.cap, opts.max_size, opts.max_degree);
    } catch (const NonPolynomialGenerator& e) {
        res.exit_code = kExitUsage;
        res.report["verdict"] = "error";
        res.report["message"] = e.what();
        human << "error: " << e.what() << "\n";
        res.report["timing_ms"] = timer.elapsed_ms();
        res.human = human.str();
        return res;
    }

    if (auto* ub = std::get_if<Unbounded>(&closure)) {
        res.exit_code = kExitInconclusive;
        res.report["verdict"] = "unbounded";
        Json cl;
        cl["status"] = "unbounded";
        cl["reached_size"] = ub->reached_size;
        cl["reached_degree"] = ub->reached_degree;
        cl["frontier"] = exprs_json(ub->frontier);
        res.report["closure"] = cl;
        human << "verdict: inconclusive; dictionary closure exceeded bounds (size "
              << opts.max_size << ", degree " << opts.max_degree << ")\n";
        human << "reached size " << ub->reached_size << ", degree " << ub->reached_degree << "\n";
        human << "missing monomials:";
        for (const auto& f : ub->frontier) human << " " << f.to_string();
        human << "\n";
        human << "note: a bounded search cannot distinguish a missing embedding from one"
              << " larger than the bounds\n";
        res.report["timing_ms"] = timer.elapsed_ms();
        res.human = human.str();
        return res;
    }

    auto& closed = std::get<Closed>(closure);
    KoopmanModel model = assemble_embedding(sys, ex.cap, closed);
    bool verified = verify_embedding(sys, model);
    Json cl;
    cl["status"] = "closed";
    cl["dictionary"] = exprs_json(closed.dictionary.basis);
    cl["a_bar"] = matrix_json(closed.a_bar);
    cl["c_bar"] = matrix_json(closed.c_bar);
    res.report["closure"] = cl;
    res.report["model"] = model_json(model);
    res.report["verified"] = verified;
    res.exit_code = verified ? kExitSuccess : kExitNotExists;
    res.report["verdict"] = verified ? "exists" : "verification_failed";

    human << "verdict: exact Koopman linear embedding constructed"
          << (verified ? " and verified symbolically\n" : " but FAILED verification\n");
    human << "note: " << cli_detail::kAssumptionNote << "\n";
    cli_detail::describe_cap(human, ex.cap);
    human << "dictionary: [";
    for (size_t i = 0; i < closed.dictionary.basis.size(); ++i)
        human << (i ? ", " : "") << closed.dictionary.basis[i].to_string();
    human << "]\n";
    cli_detail::describe_model(human, model);
    res.report["timing_ms"] = timer.elapsed_ms();
    res.human = human.str();
    return res;
}

inline CliResult run_predict(const std::string& path, size_t horizon,
                             size_t term_cap = kDefaultTermCap) {
    cli_detail::Stopwatch timer;
    CliResult res;
    res.report = cli_detail::report_header("predict", path);
    res.report["N"] = horizon;
    std::ostringstream human;

    SystemDef sys;
    try {
        sys = parse_system_file(path);
    } catch (const std::exception& e) {
        return cli_detail::input_error("predict", path, e.what());
    }
    if (horizon < 1) return cli_detail::input_error("predict", path, "N must be >= 1");

    try {
        std::vector<Expr> composed = compose(sys, horizon, term_cap);
        res.report["composition"] = exprs_json(composed);
        human << "x(" << horizon << ") =\n";
        for (size_t i = 0; i < composed.size(); ++i)
            human << "  " << sys.states[i].name << ": " << composed[i].to_string() << "\n";

        NStepResult pred = n_step_predictor(sys, horizon, term_cap);
        if (auto* ok = std::get_if<NStepForm>(&pred)) {
            res.exit_code = kExitSuccess;
            res.report["verdict"] = "affine";
            res.report["phi"] = exprs_json(ok->phi_n);
            res.report["b"] = matrix_json(ok->b_n);
            res.report["step_inputs"] = symbols_json(ok->step_inputs);
            human << "N-step linear predictor exists: x(N) = phi(x) + B u_{0:N-1}\n";
            human << "phi = [";
            for (size_t i = 0; i < ok->phi_n.size(); ++i)
                human << (i ? ", " : "") << ok->phi_n[i].to_string();
            human << "]\n";
            human << "B = " << matrix_to_text(ok->b_n) << "\n";
        } else {
            auto& fail = std::get<NotAffine>(pred);
            res.exit_code = kExitNotExists;
            res.report["verdict"] = "not_affine";
            Json w;
            w["expr_index"] = fail.expr_index;
            w["symbol"] = fail.target.name;
            w["partial"] = fail.partial.to_string();
            res.report["witness"] = w;
            human << "no " << horizon << "-step linear predictor: d x(" << horizon << ")["
                  << fail.expr_index << "] / d " << fail.target.name
                  << " is non-constant: " << fail.partial.to_string() << "\n";
        }
    } catch (const ExpressionBlowup& e) {
        res.exit_code = kExitInconclusive;
        res.report["verdict"] = "expression_blowup";
        res.report["message"] = e.what();
        res.report["term_cap"] = e.cap;
        human << "inconclusive: " << e.what() << "\n";
    }
    res.report["timing_ms"] = timer.elapsed_ms();
    res.human = human.str();
    return res;
}

inline CliResult run_simulate(const std::string& path, const SimulateOptions& opts) {
    cli_detail::Stopwatch timer;
    CliResult res;
    res.report = cli_detail::report_header("simulate", path);
    std::ostringstream human;

    SystemDef sys;
    try {
        sys = parse_system_file(path);
    } catch (const std::exception& e) {
        return cli_detail::input_error("simulate", path, e.what());
    }
    if (opts.x0.size() != sys.state_dim())
        return cli_detail::input_error(
            "simulate", path,
            "--x0 needs " + std::to_string(sys.state_dim()) + " comma-separated values");

    std::vector<std::vector<double>> inputs;
    try {
        if (opts.inputs_text) {
            inputs = cli_detail::parse_input_sequence(*opts.inputs_text, sys.input_dim());
            res.report["inputs_source"] = "given";
        } else if (sys.input_dim() == 0) {
            inputs.assign(opts.horizon, {});
            res.report["inputs_source"] = "autonomous";
        } else if (opts.random_inputs) {
            inputs = random_inputs(opts.horizon, sys.input_dim(), opts.seed);
            res.report["inputs_source"] = "random";
            res.report["seed"] = opts.seed;
        } else {
            inputs.assign(opts.horizon, std::vector<double>(sys.input_dim(), 0.0));
            res.report["inputs_source"] = "zero";
        }
    } catch (const std::exception& e) {
        return cli_detail::input_error("simulate", path, e.what());
    }
    res.report["x0"] = opts.x0;
    res.report["horizon"] = inputs.size();

    Trajectory nonlinear;
    try {
        nonlinear = simulate_nonlinear(sys, opts.x0, inputs);
    } catch (const NonFiniteState& e) {
        res.exit_code = kExitInconclusive;
        res.report["verdict"] = "non_finite_state";
        res.report["message"] = e.what();
        res.report["timing_ms"] = timer.elapsed_ms();
        res.human = std::string("simulation diverged: ") + e.what() + "\n";
        return res;
    }

    if (opts.csv_path) {
        write_csv_file(*opts.csv_path, nonlinear, sys.states, sys.inputs);
        res.report["csv"] = *opts.csv_path;
        human << "nonlinear trajectory written to " << *opts.csv_path << "\n";
    }

    // Attempt the exact lifted model; simulation still succeeds without one.
    res.report["bounds"] =
        Json{{"max_size", opts.embed.max_size}, {"max_degree", opts.embed.max_degree}};
    std::optional<KoopmanModel> model;
    std::string no_model_reason;
    CertificationOutcome outcome = certify(sys);
    if (auto* ex = std::get_if<Exists>(&outcome)) {
        try {
            ClosureResult closure =
                closure_search(ex->cap, opts.embed.max_size, opts.embed.max_degree);
            if (auto* closed = std::get_if<Closed>(&closure))
                model = assemble_embedding(sys, ex->cap, *closed);
            else
                no_model_reason = "dictionary closure exceeded bounds";
        } catch (const NonPolynomialGenerator& e) {
            no_model_reason = e.what();
        }
    } else {
        no_model_reason = "no CAP structure";
    }

    res.exit_code = kExitSuccess;
    res.report["verdict"] = "ok";
    if (model) {
        try {
            Trajectory lifted = simulate_koopman(*model, opts.x0, inputs);
            CompareReport cmp = compare(nonlinear, lifted, opts.tol_abs, opts.tol_rel);
            Json cj;
            cj["tol_abs"] = opts.tol_abs;
            cj["tol_rel"] = opts.tol_rel;
            cj["max_abs"] = cmp.max_abs;
            cj["max_rel"] = cmp.max_rel;
            cj["pass"] = cmp.pass;
            res.report["koopman"] = Json{{"available", true}, {"n_z", model->lifted_dim()}};
            res.report["compare"] = cj;
            if (opts.csv_path) {
                std::string kpath = *opts.csv_path + ".koopman.csv";
                write_csv_file(kpath, lifted, sys.states, sys.inputs);
                res.report["koopman_csv"] = kpath;
            }
            human << "koopman rollout compared over " << inputs.size()
                  << " steps: max_abs = " << cmp.max_abs << ", max_rel = " << cmp.max_rel
                  << ", pass = " << (cmp.pass ? "yes" : "no") << "\n";
            if (!cmp.pass) res.exit_code = kExitNotExists;
        } catch (const NonFiniteState& e) {
            res.report["koopman"] =
                Json{{"available", true}, {"diverged", true}, {"message", e.what()}};
            human << "koopman rollout diverged: " << e.what() << "\n";
        }
    } else {
        res.report["koopman"] = Json{{"available", false}, {"reason", no_model_reason}};
        human << "no exact lifted model available (" << no_model_reason << ")\n";
    }
    human << "final state:";
    for (double v : nonlinear.states.back()) human << " " << v;
    human << "\n";
    res.report["final_state"] = nonlinear.states.back();
    res.report["timing_ms"] = timer.elapsed_ms();
    res.human = human.str();
    return res;
}

inline CliResult run_edmd(const std::string& path, const EdmdOptions& opts) {
    cli_detail::Stopwatch timer;
    CliResult res;
    res.report = cli_detail::report_header("edmd", path);
    std::ostringstream human;

    SystemDef sys;
    try {
        sys = parse_system_file(path);
    } catch (const std::exception& e) {
        return cli_detail::input_error("edmd", path, e.what());
    }
    if (opts.x0.size() != sys.state_dim())
        return cli_detail::input_error(
            "edmd", path,
            "--x0 needs " + std::to_string(sys.state_dim()) + " comma-separated values");
    if (opts.samples < 2) return cli_detail::input_error("edmd", path, "--samples must be >= 2");

    std::vector<Expr> lifting;
    try {
        auto symbols = sys.symbol_map();
        std::stringstream ss(opts.lifting_text);
        std::string item;
        while (std::getline(ss, item, ',')) lifting.push_back(parse_expression(item, symbols));
        if (lifting.empty()) throw std::invalid_argument("--lifting list is empty");
        for (const auto& e : lifting)
            for (const auto& s : sys.inputs)
                if (e.contains(s))
                    throw std::invalid_argument("lifting entries must not involve inputs");
    } catch (const std::exception& e) {
        return cli_detail::input_error("edmd", path, e.what());
    }

    res.report["seed"] = opts.seed;
    res.report["samples"] = opts.samples;
    res.report["x0"] = opts.x0;
    res.report["lifting"] = exprs_json(lifting);

    Trajectory traj;
    try {
        auto inputs = random_inputs(opts.samples, sys.input_dim(), opts.seed);
        traj = simulate_nonlinear(sys, opts.x0, inputs);
    } catch (const NonFiniteState& e) {
        res.exit_code = kExitInconclusive;
        res.report["verdict"] = "non_finite_state";
        res.report["message"] = e.what();
        res.report["timing_ms"] = timer.elapsed_ms();
        res.human = std::string("data generation diverged: ") + e.what() + "\n";
        return res;
    }

    EdmdFit fit = edmd_fit(traj, lifting, sys.states, sys.inputs);
    auto eig_json = [](const Eigen::MatrixXd& m) {
        Json rows = Json::array();
        for (long r = 0; r < m.rows(); ++r) {
            Json row = Json::array();
            for (long c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
            rows.push_back(row);
        }
        return rows;
    };
    res.exit_code = kExitSuccess;
    res.report["verdict"] = "ok";
    res.report["a"] = eig_json(fit.a);
    res.report["b"] = eig_json(fit.b);
    res.report["c"] = eig_json(fit.c);
    res.report["residual_dynamics"] = fit.residual_dynamics;
    res.report["residual_output"] = fit.residual_output;
    res.report["condition_number"] = fit.condition_number;
    res.report["rank_warning"] = fit.rank_warning;

    human << "EDMD fit from " << opts.samples << " samples (seed " << opts.seed << ")\n";
    human << "A =\n" << fit.a << "\n";
    if (fit.b.cols() > 0) human << "B =\n" << fit.b << "\n";
    human << "C =\n" << fit.c << "\n";
    human << "residuals: dynamics " << fit.residual_dynamics << ", output "
          << fit.residual_output << "\n";
    human << "condition number: " << fit.condition_number << "\n";
    if (fit.condition_number > 1e12)
        human << "warning: data matrix condition number exceeds 1e12; fit is minimum-norm\n";
    if (fit.rank_warning) human << "warning: rank-deficient regression data\n";
    res.human = human.str();
    res.report["timing_ms"] = timer.elapsed_ms();
    return res;
}

}  // namespace koopcert
