// Command-line front end: certify CAP structures, build exact Koopman
// embeddings, extract N-step predictors, simulate, and fit EDMD models.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "koopcert/cli.hpp"

namespace {

int finish(const koopcert::CliResult& res, const std::string& json_path) {
    std::cout << res.human;
    if (!json_path.empty()) {
        std::ofstream os(json_path);
        if (!os) {
            std::cerr << "error: cannot write JSON report to " << json_path << "\n";
            return koopcert::kExitUsage;
        }
        os << res.report.dump(2) << "\n";
    }
    return res.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Koopman linear embedding certifier", "koopcert"};
    app.require_subcommand(1);
    // let --json appear after the subcommand as well
    app.fallthrough();
    std::string json_path;
    app.add_option("--json", json_path, "write a JSON report to this path")->capture_default_str();

    std::string path;

    auto* certify = app.add_subcommand("certify", "decide existence of a CAP structure");
    certify->fallthrough();
    certify->add_option("file", path, "system definition file")->required();

    koopcert::EmbedOptions embed_opts;
    auto* embed = app.add_subcommand("embed", "construct and verify a Koopman linear embedding");
    embed->fallthrough();
    embed->add_option("file", path, "system definition file")->required();
    embed->add_option("--max-size", embed_opts.max_size, "dictionary size bound")
        ->capture_default_str();
    embed->add_option("--max-degree", embed_opts.max_degree, "dictionary degree bound")
        ->capture_default_str();

    size_t horizon_n = 1;
    auto* predict = app.add_subcommand("predict", "extract an N-step linear predictor");
    predict->fallthrough();
    predict->add_option("file", path, "system definition file")->required();
    predict->add_option("N", horizon_n, "prediction horizon")->required();

    koopcert::SimulateOptions sim_opts;
    std::string x0_text, inputs_text, csv_path;
    auto* simulate = app.add_subcommand("simulate", "roll out the system and its lifted model");
    simulate->fallthrough();
    simulate->add_option("file", path, "system definition file")->required();
    simulate->add_option("--x0", x0_text, "initial state, comma separated")->required();
    simulate->add_option("--horizon", sim_opts.horizon, "number of steps")->capture_default_str();
    simulate->add_option("--seed", sim_opts.seed, "PRNG seed for --random")->capture_default_str();
    auto* random_flag =
        simulate->add_flag("--random", sim_opts.random_inputs, "draw inputs uniformly from [-1,1]");
    auto* inputs_opt = simulate->add_option(
        "--inputs", inputs_text, "explicit inputs: steps separated by ';', entries by ','");
    inputs_opt->excludes(random_flag);
    simulate->add_option("--csv", csv_path, "write the trajectory as CSV");
    simulate->add_option("--tol-abs", sim_opts.tol_abs, "comparison absolute tolerance")
        ->capture_default_str();
    simulate->add_option("--tol-rel", sim_opts.tol_rel, "comparison relative tolerance")
        ->capture_default_str();
    simulate->add_option("--max-size", sim_opts.embed.max_size, "dictionary size bound")
        ->capture_default_str();
    simulate->add_option("--max-degree", sim_opts.embed.max_degree, "dictionary degree bound")
        ->capture_default_str();

    koopcert::EdmdOptions edmd_opts;
    std::string edmd_x0_text;
    auto* edmd = app.add_subcommand("edmd", "least-squares fit of a lifted linear model");
    edmd->fallthrough();
    edmd->add_option("file", path, "system definition file")->required();
    edmd->add_option("--lifting", edmd_opts.lifting_text, "lifting functions, comma separated")
        ->required();
    edmd->add_option("--x0", edmd_x0_text, "initial state, comma separated")->required();
    edmd->add_option("--samples", edmd_opts.samples, "trajectory length")->capture_default_str();
    edmd->add_option("--seed", edmd_opts.seed, "PRNG seed for the input sequence")
        ->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (certify->parsed()) return finish(koopcert::run_certify(path), json_path);
        if (embed->parsed()) return finish(koopcert::run_embed(path, embed_opts), json_path);
        if (predict->parsed()) return finish(koopcert::run_predict(path, horizon_n), json_path);
        if (simulate->parsed()) {
            try {
                sim_opts.x0 = koopcert::cli_detail::parse_double_list(x0_text);
            } catch (const std::exception& e) {
                std::cerr << "error: bad --x0: " << e.what() << "\n";
                return koopcert::kExitUsage;
            }
            if (!inputs_text.empty()) sim_opts.inputs_text = inputs_text;
            if (!csv_path.empty()) sim_opts.csv_path = csv_path;
            return finish(koopcert::run_simulate(path, sim_opts), json_path);
        }
        if (edmd->parsed()) {
            try {
                edmd_opts.x0 = koopcert::cli_detail::parse_double_list(edmd_x0_text);
            } catch (const std::exception& e) {
                std::cerr << "error: bad --x0: " << e.what() << "\n";
                return koopcert::kExitUsage;
            }
            return finish(koopcert::run_edmd(path, edmd_opts), json_path);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return koopcert::kExitUsage;
    }
    return koopcert::kExitUsage;
}
