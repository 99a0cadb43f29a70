#include <catch2/catch_amalgamated.hpp>
#include <cstdio>
#include <fstream>

#include "koopcert/cli.hpp"

using namespace koopcert;

namespace {

const std::string kSystems = std::string(KOOPCERT_SOURCE_DIR) + "/systems/";

Json strip_timing(Json j) {
    j.erase("timing_ms");
    return j;
}

}  // namespace

TEST_CASE("certify command") {
    SECTION("slow manifold exists with the identity transformation") {
        CliResult res = run_certify(kSystems + "slow_manifold.sys");
        CHECK(res.exit_code == kExitSuccess);
        CHECK(res.report["verdict"] == "exists");
        CHECK(res.report["transformation"]["rational"][0][0] == "1");
        CHECK(res.report["transformation"]["rational"][0][1] == "0");
        CHECK(res.human.find("exists") != std::string::npos);
    }
    SECTION("squared state with direct input is refuted with a witness") {
        CliResult res = run_certify(kSystems + "remark1.sys");
        CHECK(res.exit_code == kExitNotExists);
        CHECK(res.report["verdict"] == "not_exists");
        std::string partial = res.report["witness"]["partial"];
        CHECK(partial.find("x") != std::string::npos);
    }
    SECTION("missing file") {
        CliResult res = run_certify(kSystems + "no_such_file.sys");
        CHECK(res.exit_code == kExitUsage);
    }
    SECTION("malformed file") {
        std::string path = "malformed_test.sys";
        std::ofstream(path) << "state: x\ninput: u\ndyn x: x^2 +\n";
        CliResult res = run_certify(path);
        CHECK(res.exit_code == kExitUsage);
        CHECK(res.report["verdict"] == "error");
        std::remove(path.c_str());
    }
}

TEST_CASE("embed command") {
    SECTION("slow manifold produces the three-dimensional model") {
        CliResult res = run_embed(kSystems + "slow_manifold.sys", {});
        CHECK(res.exit_code == kExitSuccess);
        CHECK(res.report["verified"] == true);
        CHECK(res.report["model"]["n_z"] == 3);
        auto a = res.report["model"]["a_k"]["rational"];
        CHECK(a[0][0] == "1");
        CHECK(a[1][1] == "9/10");
        CHECK(a[2][2] == "81/100");
    }
    SECTION("squaring tail exits with the inconclusive code and a frontier") {
        CliResult res = run_embed(kSystems + "example2.sys", {});
        CHECK(res.exit_code == kExitInconclusive);
        CHECK(res.report["verdict"] == "unbounded");
        std::string frontier = res.report["closure"]["frontier"][0];
        CHECK(frontier.find("^32") != std::string::npos);
    }
    SECTION("three-state example verifies at dimension five") {
        CliResult res = run_embed(kSystems + "example1.sys", {});
        CHECK(res.exit_code == kExitSuccess);
        CHECK(res.report["model"]["n_z"] == 5);
        CHECK(res.report["verified"] == true);
    }
}

TEST_CASE("predict command") {
    SECTION("reports the two-step composition and the offending partial") {
        CliResult res = run_predict(kSystems + "remark1.sys", 2);
        CHECK(res.exit_code == kExitNotExists);
        CHECK(res.report["composition"][0] == "x^4 + 2*x^2*u0 + u0^2 + u1");
        CHECK(res.report["verdict"] == "not_affine");
    }
    SECTION("slow manifold is affine at every horizon") {
        CliResult res = run_predict(kSystems + "slow_manifold.sys", 3);
        CHECK(res.exit_code == kExitSuccess);
        CHECK(res.report["verdict"] == "affine");
        CHECK(res.report["b"]["rows"] == 2);
        CHECK(res.report["b"]["cols"] == 3);
    }
}

TEST_CASE("simulate command") {
    SimulateOptions opts;
    opts.x0 = {0.5, 1.0};
    opts.horizon = 20;
    opts.seed = 7;
    opts.random_inputs = true;
    opts.csv_path = "simulate_test.csv";
    CliResult res = run_simulate(kSystems + "slow_manifold.sys", opts);
    CHECK(res.exit_code == kExitSuccess);
    CHECK(res.report["compare"]["pass"] == true);
    CHECK(res.report["compare"]["max_abs"].get<double>() <= 1e-9);
    CHECK(res.report["seed"] == 7);

    std::ifstream csv("simulate_test.csv");
    REQUIRE(csv.good());
    std::string header;
    std::getline(csv, header);
    CHECK(header == "t,x1,x2,u");
    size_t rows = 0;
    std::string line;
    while (std::getline(csv, line)) ++rows;
    CHECK(rows == 21);
    std::remove("simulate_test.csv");
    std::remove("simulate_test.csv.koopman.csv");

    SECTION("wrong x0 dimension is a usage error") {
        SimulateOptions bad = opts;
        bad.x0 = {1.0};
        CHECK(run_simulate(kSystems + "slow_manifold.sys", bad).exit_code == kExitUsage);
    }
}

TEST_CASE("edmd command") {
    EdmdOptions opts;
    opts.lifting_text = "x1,x2,x2^2";
    opts.x0 = {0.3, 0.8};
    opts.samples = 500;
    opts.seed = 11;
    CliResult res = run_edmd(kSystems + "slow_manifold.sys", opts);
    CHECK(res.exit_code == kExitSuccess);
    CHECK(res.report["residual_dynamics"].get<double>() <= 1e-8);
    double a00 = res.report["a"][0][0];
    CHECK(a00 == Catch::Approx(1.0).margin(1e-6));

    SECTION("lifting containing an input is rejected") {
        EdmdOptions bad = opts;
        bad.lifting_text = "x1,u";
        CHECK(run_edmd(kSystems + "slow_manifold.sys", bad).exit_code == kExitUsage);
    }
}

TEST_CASE("JSON reports round-trip and reruns are reproducible") {
    CliResult res = run_embed(kSystems + "slow_manifold.sys", {});
    std::string dumped = res.report.dump(2);
    Json parsed = Json::parse(dumped);
    CHECK(parsed.dump(2) == dumped);

    CliResult again = run_embed(kSystems + "slow_manifold.sys", {});
    CHECK(strip_timing(res.report) == strip_timing(again.report));

    SimulateOptions opts;
    opts.x0 = {0.5, 1.0};
    opts.horizon = 10;
    opts.seed = 3;
    opts.random_inputs = true;
    CliResult sim1 = run_simulate(kSystems + "slow_manifold.sys", opts);
    CliResult sim2 = run_simulate(kSystems + "slow_manifold.sys", opts);
    CHECK(strip_timing(sim1.report) == strip_timing(sim2.report));
}

TEST_CASE("autonomous systems run through the whole pipeline") {
    std::string path = "autonomous_test.sys";
    std::ofstream(path) << "state: x\ninput:\ndyn x: 0.5*x\n";
    CliResult cert = run_certify(path);
    CHECK(cert.exit_code == kExitSuccess);
    CliResult emb = run_embed(path, {});
    CHECK(emb.exit_code == kExitSuccess);
    CHECK(emb.report["model"]["n_z"] == 1);
    CHECK(emb.report["verified"] == true);

    SimulateOptions opts;
    opts.x0 = {2.0};
    opts.horizon = 10;
    CliResult sim = run_simulate(path, opts);
    CHECK(sim.exit_code == kExitSuccess);
    CHECK(sim.report["compare"]["pass"] == true);
    std::remove(path.c_str());
}

TEST_CASE("elementary functions certify but stop the dictionary search") {
    std::string path = "sin_test.sys";
    std::ofstream(path) << "state: x1 x2\ninput: u\ndyn x1: sin(x2) + x1 + u\ndyn x2: 0.5*x2\n";
    CliResult cert = run_certify(path);
    CHECK(cert.exit_code == kExitSuccess);  // the structure itself is certifiable
    CliResult emb = run_embed(path, {});
    CHECK(emb.exit_code == kExitUsage);  // closure requires polynomial generators
    std::string message = emb.report["message"];
    CHECK(message.find("sin") != std::string::npos);

    // simulation still works; the lifted model is just unavailable
    SimulateOptions opts;
    opts.x0 = {0.1, 0.2};
    opts.horizon = 5;
    CliResult sim = run_simulate(path, opts);
    CHECK(sim.exit_code == kExitSuccess);
    CHECK(sim.report["koopman"]["available"] == false);
    std::remove(path.c_str());
}

TEST_CASE("explicit input sequences") {
    SimulateOptions opts;
    opts.x0 = {0.0, 1.0};
    opts.inputs_text = "0.5;-0.25;0.125";
    CliResult res = run_simulate(kSystems + "slow_manifold.sys", opts);
    CHECK(res.exit_code == kExitSuccess);
    CHECK(res.report["horizon"] == 3);
    CHECK(res.report["inputs_source"] == "given");

    SimulateOptions bad = opts;
    bad.inputs_text = "0.5,0.5";  // two entries for a one-input system
    CHECK(run_simulate(kSystems + "slow_manifold.sys", bad).exit_code == kExitUsage);
}

TEST_CASE("predict reports expression blowup as inconclusive") {
    std::string path = "blowup_test.sys";
    std::ofstream(path) << "state: x\ninput: u\ndyn x: (x + 1)^3 + u\n";
    CliResult res = run_predict(path, 6, 50);
    CHECK(res.exit_code == kExitInconclusive);
    CHECK(res.report["verdict"] == "expression_blowup");
    std::remove(path.c_str());
}

TEST_CASE("reserved step-input names are rejected at parse time") {
    std::string path = "reserved_test.sys";
    std::ofstream(path) << "state: u0\ninput: u\ndyn u0: u0 + u\n";
    CliResult res = run_certify(path);
    CHECK(res.exit_code == kExitUsage);
    std::remove(path.c_str());
}
