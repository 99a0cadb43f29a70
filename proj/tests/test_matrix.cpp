#include <catch2/catch_amalgamated.hpp>

#include "koopcert/matrix.hpp"
#include "support/oracles.hpp"

using namespace koopcert;
using koopcert::testing::Rng;

namespace {
Rational q(long long n, long long d = 1) { return rational(n, d); }
}  // namespace

TEST_CASE("rank") {
    CHECK(rank(RationalMatrix{{q(1)}, {q(-2)}, {q(2)}}) == 1);
    CHECK(rank(RationalMatrix::zeros(3, 2)) == 0);
    CHECK(rank(RationalMatrix::identity(4)) == 4);

    SECTION("agrees with an independently coded elimination") {
        Rng rng(23);
        for (int i = 0; i < 150; ++i) {
            size_t r = static_cast<size_t>(rng.uniform_int(1, 6));
            size_t c = static_cast<size_t>(rng.uniform_int(1, 6));
            RationalMatrix m = testing::random_matrix(rng, r, c, 2);
            CHECK(rank(m) == testing::rank_oracle(m));
        }
    }
}

TEST_CASE("inverse") {
    RationalMatrix t{{q(1), q(0), q(0)}, {q(-2), q(-1), q(0)}, {q(0), q(1), q(1)}};
    RationalMatrix t_inv = inverse(t);
    CHECK(t * t_inv == RationalMatrix::identity(3));
    CHECK(t_inv * t == RationalMatrix::identity(3));

    CHECK(inverse(RationalMatrix::identity(5)) == RationalMatrix::identity(5));
    CHECK_THROWS_AS(inverse(RationalMatrix{{q(1), q(1)}, {q(1), q(1)}}), SingularMatrix);
    CHECK_THROWS_AS(inverse(RationalMatrix::zeros(2, 3)), DimensionMismatch);

    SECTION("random invertible matrices invert exactly") {
        Rng rng(29);
        for (int i = 0; i < 60; ++i) {
            size_t n = static_cast<size_t>(rng.uniform_int(1, 6));
            RationalMatrix m = testing::random_invertible(rng, n);
            CHECK(m * inverse(m) == RationalMatrix::identity(n));
        }
    }
}

TEST_CASE("right inverse") {
    CHECK(right_inverse(RationalMatrix{{q(1), q(0)}}) == RationalMatrix{{q(1)}, {q(0)}});
    CHECK(right_inverse(RationalMatrix{{q(1), q(2)}}) == RationalMatrix{{q(1)}, {q(0)}});

    RationalMatrix square{{q(2), q(1)}, {q(1), q(1)}};
    CHECK(right_inverse(square) == inverse(square));

    CHECK_THROWS_AS(right_inverse(RationalMatrix{{q(1)}, {q(2)}}), NotFullRowRank);

    SECTION("property: m * right_inverse(m) == I on random full-row-rank matrices") {
        Rng rng(31);
        int done = 0;
        while (done < 80) {
            size_t r = static_cast<size_t>(rng.uniform_int(1, 6));
            size_t c = static_cast<size_t>(rng.uniform_int(static_cast<int>(r), 8));
            RationalMatrix m = testing::random_matrix(rng, r, c, 3);
            if (rank(m) != r) continue;
            CHECK(m * right_inverse(m) == RationalMatrix::identity(r));
            ++done;
        }
    }
}

TEST_CASE("row compression") {
    SECTION("first certification step of the three-state example") {
        RationalMatrix b{{q(1)}, {q(-2)}, {q(2)}};
        RowCompression rc = row_compress(b);
        CHECK(rc.rank == 1);
        CHECK(rc.t_bar == RationalMatrix{{q(1), q(0), q(0)}, {q(2), q(1), q(0)}, {q(-2), q(0), q(1)}});
        CHECK(rc.d_bar == RationalMatrix{{q(1)}});
    }
    SECTION("already compressed") {
        RowCompression rc = row_compress(RationalMatrix{{q(1)}, {q(0)}});
        CHECK(rc.rank == 1);
        CHECK(rc.t_bar == RationalMatrix::identity(2));
        CHECK(rc.d_bar == RationalMatrix{{q(1)}});
    }
    SECTION("second certification step") {
        RowCompression rc = row_compress(RationalMatrix{{q(-1)}, {q(1)}});
        CHECK(rc.rank == 1);
        CHECK(rc.t_bar == RationalMatrix{{q(-1), q(0)}, {q(1), q(1)}});
        CHECK(rc.d_bar == RationalMatrix{{q(1)}});
    }
    SECTION("errors") {
        CHECK_THROWS_AS(row_compress(RationalMatrix::zeros(2, 1)), ZeroMatrixError);
        CHECK_THROWS_AS(row_compress(RationalMatrix::identity(2)), FullRowRankError);
    }
    SECTION("properties on random rank-deficient matrices") {
        Rng rng(37);
        int done = 0;
        while (done < 80) {
            size_t r = static_cast<size_t>(rng.uniform_int(2, 6));
            size_t c = static_cast<size_t>(rng.uniform_int(1, 4));
            RationalMatrix b = testing::random_matrix(rng, r, c, 2);
            size_t rk = rank(b);
            if (rk == 0 || rk == r) continue;
            RowCompression rc = row_compress(b);
            CHECK(rc.rank == rk);
            RationalMatrix stacked = block_assemble(
                {{rc.d_bar}, {RationalMatrix::zeros(r - rk, c)}});
            CHECK(rc.t_bar * b == stacked);
            CHECK(rank(rc.d_bar) == rc.d_bar.rows());
            CHECK(rc.t_bar * inverse(rc.t_bar) == RationalMatrix::identity(r));
            ++done;
        }
    }
}

TEST_CASE("solve_exact") {
    RationalMatrix v{{q(3)}, {q(-1)}};
    CHECK(solve_exact(RationalMatrix::identity(2), v) == v);

    CHECK_FALSE(solve_exact(RationalMatrix{{q(1)}, {q(2)}}, RationalMatrix{{q(1)}, {q(3)}}));

    auto x = solve_exact(RationalMatrix{{q(1), q(1)}}, RationalMatrix{{q(3)}});
    REQUIRE(x);
    CHECK(*x == RationalMatrix{{q(3)}, {q(0)}});  // free variable pinned to zero

    SECTION("solutions satisfy the system exactly") {
        Rng rng(41);
        for (int i = 0; i < 80; ++i) {
            size_t r = static_cast<size_t>(rng.uniform_int(1, 5));
            size_t c = static_cast<size_t>(rng.uniform_int(1, 5));
            RationalMatrix a = testing::random_matrix(rng, r, c, 2);
            RationalMatrix xs = testing::random_matrix(rng, c, 2, 2);
            RationalMatrix b = a * xs;  // consistent by construction
            auto sol = solve_exact(a, b);
            REQUIRE(sol);
            CHECK(a * *sol == b);
        }
    }
}

TEST_CASE("block assembly and products") {
    RationalMatrix m{{q(1), q(2)}, {q(3), q(4)}};
    CHECK(RationalMatrix::identity(2) * m == m);

    RationalMatrix t0{{q(1), q(0), q(0)}, {q(2), q(1), q(0)}, {q(-2), q(0), q(1)}};
    RationalMatrix t1 = blockdiag(RationalMatrix::identity(1),
                                  RationalMatrix{{q(-1), q(0)}, {q(1), q(1)}});
    CHECK(t1 * t0 ==
          RationalMatrix{{q(1), q(0), q(0)}, {q(-2), q(-1), q(0)}, {q(0), q(1), q(1)}});

    CHECK(block_assemble({{m, RationalMatrix::zeros(2, 1)}}).cols() == 3);
    CHECK_THROWS_AS(block_assemble({{m}, {RationalMatrix::zeros(1, 3)}}), DimensionMismatch);
    CHECK_THROWS_AS(RationalMatrix::identity(2) * RationalMatrix::identity(3),
                    DimensionMismatch);

    SECTION("zero-sized blocks are legal") {
        RationalMatrix empty = RationalMatrix::zeros(0, 0);
        CHECK(blockdiag(empty, m) == m);
        CHECK(blockdiag(m, empty) == m);
    }
}
