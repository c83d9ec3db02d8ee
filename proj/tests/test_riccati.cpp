#include <doctest.h>

#include <cmath>

#include "iss/baselines.hpp"
#include "iss/errors.hpp"
#include "iss/riccati.hpp"
#include "iss/rng.hpp"

using namespace iss;

namespace {

Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    Matrix m(rows.size(), rows.begin()->size());
    std::size_t r = 0;
    for (const auto& row : rows) {
        std::size_t c = 0;
        for (double v : row) m(r, c++) = v;
        ++r;
    }
    return m;
}

Matrix closed_loop(const Matrix& a, const Matrix& b, const Matrix& k) { return sub(a, matmul(b, k)); }

}  // namespace

TEST_CASE("scalar CARE with a marginally stable plant") {
    const Matrix a = from_rows({{0.0}});
    const Matrix b = from_rows({{1.0}});
    const Matrix q = Matrix::identity(1);
    const Matrix r = Matrix::identity(1);
    const CareResult res = care_solve(a, b, q, r);
    CHECK(res.p(0, 0) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(res.k(0, 0) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(res.residual <= 1e-10);
}

TEST_CASE("scalar CARE with an unstable plant and vanishing state cost") {
    // 2P - P^2 + Q = 0 with Q = 1e-9: P = 1 + sqrt(1 + Q).
    const Matrix a = from_rows({{1.0}});
    const Matrix b = from_rows({{1.0}});
    const Matrix q = from_rows({{1e-9}});
    const Matrix r = Matrix::identity(1);
    const CareResult res = care_solve(a, b, q, r);
    const double expected = 1.0 + std::sqrt(1.0 + 1e-9);
    CHECK(res.p(0, 0) == doctest::Approx(expected).epsilon(1e-9));
    CHECK(res.k(0, 0) == doctest::Approx(expected).epsilon(1e-9));
    CHECK(is_hurwitz(closed_loop(a, b, res.k)));
}

TEST_CASE("double integrator gain hits the closed form") {
    const Matrix a = from_rows({{0.0, 1.0}, {0.0, 0.0}});
    const Matrix b = from_rows({{0.0}, {1.0}});
    const CareResult res = care_solve(a, b, Matrix::identity(2), Matrix::identity(1));
    CHECK(std::fabs(res.k(0, 0) - 1.0) <= 1e-6);
    CHECK(std::fabs(res.k(0, 1) - std::sqrt(3.0)) <= 1e-6);
    CHECK(res.p(0, 0) == doctest::Approx(std::sqrt(3.0)).epsilon(1e-8));
    CHECK(res.p(0, 1) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(res.residual <= 1e-8);
    CHECK(is_hurwitz(closed_loop(a, b, res.k)));
}

TEST_CASE("platoon and drone design models solve cleanly") {
    SUBCASE("platoon") {
        Matrix a, b;
        platoon_lqr_model(a, b);
        const CareResult res = care_solve(a, b, Matrix::identity(2), Matrix::identity(1));
        CHECK(res.residual <= 1e-8);
        CHECK(is_hurwitz(closed_loop(a, b, res.k)));
    }
    SUBCASE("drone") {
        DroneEnv env{{}};
        Matrix a, b;
        drone_lqr_model(env, a, b);
        const CareResult res = care_solve(a, b, Matrix::identity(6), Matrix::identity(2));
        CHECK(res.residual <= 1e-8);
        CHECK(is_hurwitz(closed_loop(a, b, res.k)));
    }
}

TEST_CASE("random controllable pairs solve with tiny residuals") {
    Rng rng(12);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 2 + trial % 3;
        Matrix a(n, n), b(n, 2);
        for (double& v : a.data) v = rng.uniform(-1.0, 1.0);
        for (double& v : b.data) v = rng.uniform(-1.0, 1.0);
        const CareResult res = care_solve(a, b, Matrix::identity(n), Matrix::identity(2));
        CHECK(res.residual <= 1e-8);
        CHECK(is_hurwitz(closed_loop(a, b, res.k)));
    }
}

TEST_CASE("non-stabilizable pairs are rejected") {
    SUBCASE("unstable mode with no control authority") {
        const Matrix a = Matrix::identity(2);
        const Matrix b = Matrix(2, 1);
        CHECK_THROWS_AS(care_solve(a, b, Matrix::identity(2), Matrix::identity(1)), NumericError);
    }
    SUBCASE("imaginary-axis Hamiltonian eigenvalues") {
        const Matrix a = from_rows({{0.0}});
        const Matrix b = from_rows({{0.0}});
        CHECK_THROWS_AS(care_solve(a, b, Matrix::identity(1), Matrix::identity(1)), NumericError);
    }
}

TEST_CASE("is_hurwitz distinguishes stable from unstable matrices") {
    CHECK(is_hurwitz(from_rows({{-1.0, 0.0}, {0.0, -2.0}})));
    CHECK(is_hurwitz(from_rows({{-0.1, 1.0}, {-1.0, -0.1}})));
    CHECK(!is_hurwitz(from_rows({{0.1, 0.0}, {0.0, -1.0}})));
    CHECK(!is_hurwitz(Matrix(2, 2)));  // zero matrix is only marginally stable
}
