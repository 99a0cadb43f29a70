#include <catch2/catch_amalgamated.hpp>

#include "koopcert/certifier.hpp"
#include "support/generators.hpp"

using namespace koopcert;
using koopcert::testing::Rng;

namespace {

SystemDef slow_manifold() {
    return parse_system_string(
        "state: x1 x2\ninput: u\ndyn x1: x2^2 + x1 + u\ndyn x2: 0.9*x2\n");
}

SystemDef example1() {
    return parse_system_string(
        "state: x1 x2 x3\ninput: u\n"
        "dyn x1: (x2+x3)^2 + (x1+x2) + u\n"
        "dyn x2: (x2+x3)^2*(x2+x3-1) + x1 - 2*u\n"
        "dyn x3: (x2+x3)^2*(1-x2-x3) - x1 + 0.5*x2 + 0.5*x3 + 2*u\n");
}

Rational q(long long n, long long d = 1) { return rational(n, d); }

}  // namespace

TEST_CASE("one-step extraction") {
    SECTION("slow manifold") {
        auto r = extract_one_step(slow_manifold());
        auto& form = std::get<OneStepForm>(r);
        CHECK(form.b == RationalMatrix{{q(1)}, {q(0)}});
        auto syms = slow_manifold().symbol_map();
        CHECK(form.phi[0] == parse_expression("x2^2 + x1", slow_manifold().states));
    }
    SECTION("bilinear term has no one-step form") {
        SystemDef sys = parse_system_string("state: x\ninput: u\ndyn x: x*u\n");
        auto r = extract_one_step(sys);
        auto& fail = std::get<NotOneStep>(r);
        CHECK(fail.witness.symbol.name == "u");
        CHECK(fail.witness.partial == Expr::symbol(sys.states[0]));
    }
    SECTION("three-state example input matrix") {
        auto r = extract_one_step(example1());
        auto& form = std::get<OneStepForm>(r);
        CHECK(form.b == RationalMatrix{{q(1)}, {q(-2)}, {q(2)}});
    }
}

TEST_CASE("single SCD step") {
    SECTION("first refinement of the three-state example") {
        auto one = extract_one_step(example1());
        auto& form = std::get<OneStepForm>(one);
        ScdState state{form.phi, form.b, {}, {}, example1().states, 0};
        ScdResult r = scd(state);
        auto& dec = std::get<ScdDecomposed>(r);
        CHECK(dec.split == 1);
        CHECK(dec.t_bar ==
              RationalMatrix{{q(1), q(0), q(0)}, {q(2), q(1), q(0)}, {q(-2), q(0), q(1)}});
        CHECK(dec.next.b == RationalMatrix{{q(-1)}, {q(1)}});
        REQUIRE(dec.next.active.size() == 2);
        REQUIRE(dec.next.gamma.size() == 1);
        // gamma* = (xb2 + xb3)^2 + xb2 in the fresh tail coordinates
        const Symbol& y2 = dec.next.active[0];
        const Symbol& y3 = dec.next.active[1];
        Expr sum = Expr::symbol(y2) + Expr::symbol(y3);
        CHECK((dec.next.gamma[0] - (sum * sum + Expr::symbol(y2))).is_zero());
        // phi* rows: (y2+y3)^2 (y2+y3+1) + 2 y2  and  -(y2+y3)^2 (y2+y3+1) - 1.5 y2 + 0.5 y3
        Expr sq = sum * sum;
        Expr phi1 = sq * (sum + Expr::constant(1)) + Expr::symbol(y2) * q(2);
        Expr phi2 = sq * (sum + Expr::constant(1)) * q(-1) + Expr::symbol(y2) * q(-3, 2) +
                    Expr::symbol(y3) * q(1, 2);
        CHECK((dec.next.phi[0] - phi1).is_zero());
        CHECK((dec.next.phi[1] - phi2).is_zero());
    }
    SECTION("full-row-rank driving with nonlinear block fails") {
        SystemDef sys = parse_system_string("state: x\ninput: u\ndyn x: x^2 + u\n");
        auto one = extract_one_step(sys);
        auto& form = std::get<OneStepForm>(one);
        ScdState state{form.phi, form.b, {}, {}, sys.states, 0};
        ScdResult r = scd(state);
        auto& fail = std::get<ScdFailed>(r);
        CHECK(fail.witness.partial == parse_expression("2*x", sys.states));
    }
    SECTION("zero driving certifies any nonlinear tail") {
        SystemDef sys = parse_system_string("state: x2\ninput:\ndyn x2: x2^2\n");
        ScdState state{sys.dynamics, RationalMatrix::zeros(1, 1), {}, {}, sys.states, 0};
        ScdResult r = scd(state);
        CHECK(std::get<ScdCertified>(r).autonomous_dim == 1);
    }
}

TEST_CASE("certify: slow manifold") {
    SystemDef sys = slow_manifold();
    auto outcome = certify(sys);
    auto& ex = std::get<Exists>(outcome);
    CHECK(ex.cap.t == RationalMatrix::identity(2));
    CHECK(ex.cap.n1 == 1);
    CHECK(ex.cap.n2 == 1);
    CHECK(ex.cap.c == RationalMatrix{{q(1)}});
    CHECK(ex.cap.d == RationalMatrix{{q(1)}});
    const Symbol& xt2 = ex.cap.coords[1];
    CHECK(ex.cap.g[0] == Expr::symbol(xt2) * Expr::symbol(xt2));
    CHECK(ex.cap.h[0] == Expr::symbol(xt2) * q(9, 10));
    CHECK(cap_verify(sys, ex.cap));
}

TEST_CASE("certify: three-state example needs three iterations") {
    SystemDef sys = example1();
    auto outcome = certify(sys);
    auto& ex = std::get<Exists>(outcome);
    CHECK(ex.iterations.size() == 3);
    CHECK(ex.cap.t ==
          RationalMatrix{{q(1), q(0), q(0)}, {q(-2), q(-1), q(0)}, {q(0), q(1), q(1)}});
    CHECK(ex.cap.n1 == 2);
    CHECK(ex.cap.n2 == 1);
    CHECK(ex.cap.c == RationalMatrix{{q(-1), q(-1)}, {q(1), q(2)}});
    CHECK(ex.cap.d == RationalMatrix{{q(1)}, {q(0)}});
    const Symbol& xt3 = ex.cap.coords[2];
    Expr t3 = Expr::symbol(xt3);
    CHECK((ex.cap.g[0] - t3 * t3).is_zero());
    CHECK((ex.cap.g[1] + t3 * t3 + t3 * t3 * t3).is_zero());
    CHECK((ex.cap.h[0] - t3 * q(1, 2)).is_zero());
    CHECK(cap_verify(sys, ex.cap));
}

TEST_CASE("certify: squared state with direct input has no predictor") {
    SystemDef sys = parse_system_string("state: x\ninput: u\ndyn x: x^2 + u\n");
    auto outcome = certify(sys);
    auto& ne = std::get<NotExists>(outcome);
    CHECK(ne.iteration == 0);
    CHECK(ne.witness.partial == parse_expression("2*x", sys.states));

    // the witness can be reproduced by re-running the affinity test
    auto one = extract_one_step(sys);
    auto& form = std::get<OneStepForm>(one);
    AffineResult again = affine_decompose(form.phi, sys.states);
    CHECK(std::get<NotAffine>(again).partial == ne.witness.partial);
}

TEST_CASE("certify: autonomous squaring tail is fine") {
    SystemDef sys = parse_system_string(
        "state: x1 x2\ninput: u\ndyn x1: x1 + u\ndyn x2: x2^2\n");
    auto outcome = certify(sys);
    auto& ex = std::get<Exists>(outcome);
    CHECK(ex.cap.n2 == 1);
    const Symbol& xt2 = ex.cap.coords[1];
    CHECK((ex.cap.h[0] - Expr::symbol(xt2) * Expr::symbol(xt2)).is_zero());
    CHECK(cap_verify(sys, ex.cap));
}

TEST_CASE("cap_verify rejects perturbed structures") {
    SystemDef sys = slow_manifold();
    auto outcome = certify(sys);
    auto& ex = std::get<Exists>(outcome);

    CapStructure wrong_d = ex.cap;
    wrong_d.d.at(0, 0) = 0;
    CHECK_FALSE(cap_verify(sys, wrong_d));

    CapStructure wrong_dims = ex.cap;
    wrong_dims.n1 = 2;
    wrong_dims.n2 = 0;
    CHECK_THROWS_AS(cap_verify(sys, wrong_dims), DimensionMismatch);
}

TEST_CASE("cap_verify accepts an externally supplied CAP of the three-state example") {
    SystemDef sys = example1();
    CapStructure cap;
    cap.t = RationalMatrix{{q(1), q(0), q(0)}, {q(-2), q(-1), q(0)}, {q(0), q(1), q(1)}};
    cap.n1 = 2;
    cap.n2 = 1;
    cap.c = RationalMatrix{{q(-1), q(-1)}, {q(1), q(2)}};
    cap.d = RationalMatrix{{q(1)}, {q(0)}};
    int order = 100;
    for (int i = 1; i <= 3; ++i)
        cap.coords.push_back({"z~" + std::to_string(i), SymbolKind::auxiliary, order++});
    Expr t3 = Expr::symbol(cap.coords[2]);
    cap.g = {t3 * t3, t3 * t3 * q(-1) + t3 * t3 * t3 * q(-1)};
    cap.h = {t3 * q(1, 2)};
    CHECK(cap_verify(sys, cap));
}

TEST_CASE("property: scrambled CAP systems always certify") {
    Rng rng(53);
    for (int i = 0; i < 40; ++i) {
        auto random_cap = testing::random_cap_system(rng);
        auto outcome = certify(random_cap.sys);
        auto* ex = std::get_if<Exists>(&outcome);
        REQUIRE(ex != nullptr);
        CHECK(cap_verify(random_cap.sys, ex->cap));
        CHECK(ex->iterations.size() <= random_cap.sys.state_dim());
    }
}

TEST_CASE("property: injected cross terms always refute") {
    Rng rng(59);
    for (int i = 0; i < 40; ++i) {
        auto random_cap = testing::random_cap_system(rng);
        SystemDef bad = testing::perturb_non_cap(rng, random_cap, i % 2 == 0);
        auto outcome = certify(bad);
        bool refuted = std::holds_alternative<NotExists>(outcome) ||
                       std::holds_alternative<NotOneStep>(outcome);
        CHECK(refuted);
    }
}

TEST_CASE("property: the verdict is invariant under coordinate changes") {
    Rng rng(61);
    for (int i = 0; i < 25; ++i) {
        auto random_cap = testing::random_cap_system(rng, 4, 2);
        SystemDef sys = i % 2 == 0 ? random_cap.sys
                                   : testing::perturb_non_cap(rng, random_cap, i % 4 == 1);

        RationalMatrix s = testing::random_invertible(rng, sys.state_dim());
        RationalMatrix s_inv = inverse(s);
        std::map<std::string, Expr> binding;
        for (size_t k = 0; k < sys.state_dim(); ++k)
            binding.emplace(sys.states[k].name, linear_combination(s_inv, k, sys.states));
        SystemDef changed = sys;
        changed.dynamics = mat_apply(s, substitute_all(sys.dynamics, binding));
        changed.dynamics_source.clear();

        bool before = std::holds_alternative<Exists>(certify(sys));
        bool after = std::holds_alternative<Exists>(certify(changed));
        CHECK(before == after);
    }
}

TEST_CASE("witness names the layer component") {
    // nonlinearity hidden one layer down: x2 drives x1, x2 squares itself and
    // is reached by the input, so the second refinement must fail
    SystemDef sys = parse_system_string(
        "state: x1 x2\ninput: u\ndyn x1: x2 + u\ndyn x2: x2^2 + x1\n");
    auto outcome = certify(sys);
    auto& ne = std::get<NotExists>(outcome);
    CHECK(ne.iteration >= 1);
    CHECK_FALSE(ne.witness.partial.is_constant());
}
