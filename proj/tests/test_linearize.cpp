#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mba/linearize.hpp"
#include "oracles.hpp"

using namespace mba;

namespace {

BurgersParams burgers_params(double mu) {
    BurgersParams p;
    p.grid = Grid(64, 2.0 * std::numbers::pi, true);
    p.mu = mu;
    return p;
}

RhsFunction burgers_fn(const BurgersParams& p) {
    return [p](const Vector& u) { return burgers_rhs(u, p); };
}

/// Exact derivative of the discrete Burgers operator: -D(u0 v) + mu D(D v).
Vector burgers_jacobian_apply(const BurgersParams& p, const Vector& u0, const Vector& v) {
    Vector r = -ddx(Vector(u0.cwiseProduct(v)), p.grid, p.order);
    if (p.mu != 0.0) r += p.mu * d2dx2(v, p.grid, p.order);
    return r;
}

Vector base_state(const Grid& g) {
    Vector u(g.n);
    for (Eigen::Index i = 0; i < g.n; ++i) u[i] = 0.5 + 0.05 * std::sin(g.x(i));
    return u;
}

}  // namespace

TEST_CASE("difference quotient matches the analytic Burgers linearization") {
    for (double mu : {0.0, 7.5e-3}) {
        const auto p = burgers_params(mu);
        const Vector u0 = base_state(p.grid);
        for (unsigned s = 0; s < 4; ++s) {
            const Vector v = oracle::random_vector(64, s);
            const Vector exact = burgers_jacobian_apply(p, u0, v);
            CHECK((frechet_apply(burgers_fn(p), u0, v) - exact).norm() <= 1e-6 * exact.norm());
        }
        // Constant base state u0 = 1/2 gives pure advection at speed 1/2.
        const Vector half = Vector::Constant(64, 0.5);
        const Vector v = oracle::random_vector(64, 9);
        const Vector exact = -0.5 * ddx(v, p.grid, 4) + mu * d2dx2(v, p.grid, 4);
        CHECK((frechet_apply(burgers_fn(p), half, v) - exact).norm() <= 1e-6 * exact.norm());
    }
}

TEST_CASE("difference quotient is homogeneous to linearization accuracy") {
    const auto p = burgers_params(0.0);
    const Vector u0 = base_state(p.grid);
    const Vector v = oracle::random_vector(64, 1);
    const Vector base = frechet_apply(burgers_fn(p), u0, v);
    for (double alpha : {2.0, -1.0, 0.5}) {
        const Vector scaled = frechet_apply(burgers_fn(p), u0, Vector(alpha * v));
        CHECK((scaled - alpha * base).norm() <= 1e-5 * std::abs(alpha) * base.norm());
    }
    CHECK(frechet_apply(burgers_fn(p), u0, Vector(Vector::Zero(64))).isZero());
}

TEST_CASE("two-sided differences remove the quadratic truncation error") {
    const auto p = burgers_params(0.0);
    const Vector u0 = base_state(p.grid);
    const Vector v = oracle::random_vector(64, 5);
    const Vector exact = burgers_jacobian_apply(p, u0, v);
    FrechetConfig one{1e-5, false};
    FrechetConfig two{1e-5, true};
    const double e1 = (frechet_apply(burgers_fn(p), u0, v, one) - exact).norm();
    const double e2 = (frechet_apply(burgers_fn(p), u0, v, two) - exact).norm();
    CHECK(e2 * 10.0 <= e1);
}

TEST_CASE("dense operator of a linear right side does not depend on the step") {
    const Matrix a = oracle::random_matrix(20, 3);
    RhsFunction lin = [a](const Vector& q) { return Vector(a * q); };
    const Vector q0 = oracle::random_vector(20, 4);
    const Matrix a1 = build_full_operator(lin, q0, FrechetConfig{1e-6, false});
    const Matrix a2 = build_full_operator(lin, q0, FrechetConfig{1e-4, false});
    CHECK((a1 - a2).cwiseAbs().maxCoeff() <= 1e-9 * a.cwiseAbs().maxCoeff());
    CHECK((a1 - a).cwiseAbs().maxCoeff() <= 1e-7 * a.cwiseAbs().maxCoeff());
}

TEST_CASE("step scaling keeps large-magnitude states accurate") {
    EulerParams p;
    p.grid = Grid(16, 2.0 * std::numbers::pi, true);
    Vector q0 = uniform_euler_state(p.grid, 1.0, 0.0, 1e5);
    q0.segment(32, 16) += 50.0 * oracle::random_vector(16, 1);
    RhsFunction rhs = [p](const Vector& q) { return euler_rhs(q, p); };
    Vector v = Vector::Zero(48);
    v.segment(16, 16) = oracle::random_vector(16, 2);  // velocity direction, O(1) against p ~ 1e5
    const Vector one = frechet_apply(rhs, q0, v);
    const Vector two = frechet_apply(rhs, q0, v, FrechetConfig{1e-5, true});
    CHECK((one - two).norm() <= 1e-5 * two.norm());
}

TEST_CASE("linearization object counts right side evaluations") {
    const auto p = burgers_params(0.0);
    const Vector u0 = base_state(p.grid);
    const Linearization lin(burgers_fn(p), u0);
    CHECK(lin.rhs_calls() == 0);
    CHECK((lin.base_rhs() - burgers_rhs(u0, p)).norm() == 0.0);
    const Vector v = oracle::random_vector(64, 2);
    CHECK((lin.apply(v) - frechet_apply(burgers_fn(p), u0, v)).norm() <= 1e-14 * lin.apply(v).norm());
    CHECK(lin.rhs_calls() == 2);
    CHECK_THROWS_AS(lin.apply(Vector(Vector::Ones(3))), ContractError);
    CHECK_THROWS_AS(Linearization(burgers_fn(p), u0, FrechetConfig{0.0, false}), ConfigError);
}

TEST_CASE("reference adjoint is the transposed dense operator") {
    const auto p = burgers_params(7.5e-3);
    const Vector u0 = base_state(p.grid);
    const Matrix op = build_full_operator(burgers_fn(p), u0);
    const Vector y = oracle::random_vector(64, 8);
    CHECK((reference_adjoint_action(burgers_fn(p), u0, y) - op.transpose() * y).norm() <= 1e-12 * y.norm());

    ReferenceAdjoint ref(burgers_fn(p));
    const Vector a = ref.apply(u0, y);
    ref.apply(u0, y);
    CHECK(ref.builds() == 1);
    ref.apply(Vector(1.01 * u0), y);
    CHECK(ref.builds() == 2);
    CHECK((a - op.transpose() * y).norm() <= 1e-12 * a.norm());
}

TEST_CASE("dense operator exports as CSV") {
    const Matrix m = oracle::random_matrix(3, 1);
    const auto path = (std::filesystem::temp_directory_path() / "mba_matrix.csv").string();
    write_matrix_csv(m, path);
    std::ifstream in(path);
    std::string line;
    int rows = 0;
    while (std::getline(in, line)) {
        std::stringstream ss(line);
        std::string cell;
        int col = 0;
        while (std::getline(ss, cell, ',')) {
            CHECK(std::stod(cell) == m(rows, col));
            ++col;
        }
        CHECK(col == 3);
        ++rows;
    }
    CHECK(rows == 3);
    std::filesystem::remove(path);
}
