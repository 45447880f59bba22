#include <doctest.h>

#include <limits>

#include "mba/dam.hpp"
#include "oracles.hpp"

using namespace mba;

namespace {

LinearAction<double> dense_action(const Matrix& a) {
    return [a](const Vector& v) { return Vector(a * v); };
}

/// Operator wrapper that remembers every vector it was applied to.
struct Recorder {
    Matrix a;
    std::vector<Vector> in;
    std::vector<Vector> out;
    LinearAction<double> action() {
        return [this](const Vector& v) {
            in.push_back(v);
            out.push_back(a * v);
            return out.back();
        };
    }
};

CalculationPlan mixed_plan() {
    return parse_plan("I 1 1 2\nI 2 1 2\nP 1 2 0\nP 2 0 1\nP 1 1 2\nI 1 0 2\nP 4 1 2\n");
}

}  // namespace

TEST_CASE("factorization identity holds for every executed line") {
    Recorder rec{oracle::random_matrix(24, 11), {}, {}};
    const std::vector<Vector> inputs{oracle::random_vector(24, 1), oracle::random_vector(24, 2)};
    const auto fact = run_dam(mixed_plan(), inputs, rec.action());
    int used = 0;
    for (Eigen::Index j = 0; j < fact.cols(); ++j) {
        if (!fact.active()[j]) continue;
        const Vector& av = rec.out[used];
        CHECK((rec.in[used] - fact.V().col(j)).norm() == doctest::Approx(0.0));
        const Vector recon = fact.V() * fact.Hbar().col(j) + fact.P().col(j);
        CHECK((av - recon).norm() <= 1e-10 * av.norm());
        ++used;
    }
    CHECK(used == fact.operator_calls());
    CHECK(used == static_cast<int>(rec.in.size()));
}

TEST_CASE("nonzero V columns are orthonormal") {
    const Matrix a = oracle::random_matrix(30, 5);
    const auto fact = run_dam(classical_arnoldi_plan(12, 1), std::vector<Vector>{oracle::random_vector(30, 3)},
                              dense_action(a));
    const Matrix g = fact.V().transpose() * fact.V();
    CHECK((g - Matrix::Identity(12, 12)).cwiseAbs().maxCoeff() <= 1e-10);

    const std::vector<Vector> inputs{oracle::random_vector(24, 1), oracle::random_vector(24, 2)};
    const auto mixed = run_dam(mixed_plan(), inputs, dense_action(oracle::random_matrix(24, 4)));
    for (Eigen::Index i = 0; i < mixed.cols(); ++i)
        for (Eigen::Index j = 0; j < mixed.cols(); ++j) {
            if (!mixed.active()[i] || !mixed.active()[j]) continue;
            CHECK(std::abs(mixed.V().col(i).dot(mixed.V().col(j)) - (i == j ? 1.0 : 0.0)) <= 1e-10);
        }
}

TEST_CASE("piles are orthogonal to the first mode and H keeps the first row of Hbar") {
    const std::vector<Vector> inputs{oracle::random_vector(24, 7), oracle::random_vector(24, 8)};
    const auto fact = run_dam(mixed_plan(), inputs, dense_action(oracle::random_matrix(24, 9)));
    for (Eigen::Index j = 0; j < fact.cols(); ++j)
        CHECK(std::abs(fact.V().col(0).dot(fact.P().col(j))) <= 1e-10 * fact.P().col(j).norm() + 1e-300);
    const Matrix h = assemble_h(fact);
    CHECK((h.row(0) - fact.Hbar().row(0)).cwiseAbs().maxCoeff() <= 1e-10 * h.norm());
}

TEST_CASE("classical Arnoldi plan recovers the textbook Hessenberg matrix") {
    for (unsigned seed : {1u, 2u, 3u}) {
        const int n = 20, m = 8;
        const Matrix a = oracle::random_matrix(n, 100 + seed);
        const Vector q = oracle::random_vector(n, 200 + seed);
        const auto ref = oracle::arnoldi(a, q, m);
        const auto fact = run_dam(classical_arnoldi_plan(m, 1), std::vector<Vector>{q}, dense_action(a));
        const double scale = a.norm();
        for (int j = 0; j < m; ++j) {
            // Column signs are fixed by the positive normalization in both methods.
            CHECK((fact.V().col(j) - ref.Q.col(j)).norm() <= 1e-12 * n);
            for (int i = 0; i <= j; ++i) CHECK(std::abs(fact.Hbar()(i, j) - ref.H(i, j)) <= 1e-12 * scale);
            CHECK(std::abs(fact.P().col(j).norm() - ref.H(j + 1, j)) <= 1e-12 * scale);
        }
        CHECK(fact.norms().front() == doctest::Approx(q.norm()));
    }
}

TEST_CASE("block plan spans the block Krylov space") {
    const int n = 25;
    const Matrix a = oracle::random_matrix(n, 42);
    Matrix b(n, 2);
    b.col(0) = oracle::random_vector(n, 43);
    b.col(1) = oracle::random_vector(n, 44);
    const auto plan = parse_plan("I 1 1\nI 2 1\nP 1 1\nP 2 1\nP 3 1\nP 4 1\n");
    const auto fact = run_dam(plan, std::vector<Vector>{b.col(0), b.col(1)}, dense_action(a));
    const Matrix basis = oracle::block_krylov_basis(a, b, 3);
    CHECK(oracle::subspace_distance(fact.V(), basis) <= 1e-10);
    CHECK(oracle::subspace_distance(basis, fact.V()) <= 1e-10);
}

TEST_CASE("full-span factorization reproduces the dense transpose") {
    for (int n : {4, 9, 16}) {
        const Matrix a = oracle::random_matrix(n, 300 + n);
        const Vector q = oracle::random_vector(n, 400 + n);
        const auto fact = run_dam(classical_arnoldi_plan(n, 1), std::vector<Vector>{q}, dense_action(a));
        for (unsigned s = 0; s < 3; ++s) {
            const Vector y = oracle::random_vector(n, 500 + s);
            const Vector exact = a.transpose() * y;
            CHECK((apply_approx_transpose(fact, y) - exact).norm() <= 1e-10 * exact.norm());
            const ModalTranspose<double> frozen(fact);
            CHECK((frozen(y) - exact).norm() <= 1e-10 * exact.norm());
        }
        const Vector at_q = a.transpose() * q;
        CHECK((adjoint_action_fast(fact) - at_q).norm() <= 1e-10 * at_q.norm());
    }
}

TEST_CASE("exact when the adjoint state and its image lie in span(V)") {
    // Block-diagonal operator whose leading 3x3 block is invariant under A and A^T.
    const int n = 10;
    Matrix a = Matrix::Zero(n, n);
    a.topLeftCorner(3, 3) = oracle::random_matrix(3, 1);
    a.bottomRightCorner(7, 7) = oracle::random_matrix(7, 2);
    Vector q = Vector::Zero(n);
    q.head(3) = oracle::random_vector(3, 3);
    const auto fact = run_dam(classical_arnoldi_plan(3, 1), std::vector<Vector>{q}, dense_action(a));
    const Vector exact = a.transpose() * q;
    CHECK((apply_approx_transpose(fact, q) - exact).norm() <= 1e-10 * exact.norm());
    CHECK((adjoint_action_fast(fact) - exact).norm() <= 1e-10 * exact.norm());
}

TEST_CASE("dependent test vectors append zero columns") {
    const Matrix a = oracle::random_matrix(12, 6);
    const Vector q = oracle::random_vector(12, 7);
    const auto plan = parse_plan("I 1 1\nI 1 1\nI 2 1\nP 1 1\n");
    const auto fact = run_dam(plan, std::vector<Vector>{q, Vector(-2.5 * q)}, dense_action(a));
    REQUIRE(fact.cols() == 4);
    CHECK(fact.active() == std::vector<bool>{true, false, false, true});
    CHECK(fact.V().col(1).isZero());
    CHECK(fact.P().col(2).isZero());
    CHECK(fact.Hbar().col(1).isZero());
    CHECK(fact.operator_calls() == 2);

    // A zero test vector is dependent as well.
    auto z = dam_update(DamFactorization<double>{}, Vector(Vector::Zero(12)), dense_action(a));
    CHECK(z.cols() == 1);
    CHECK_FALSE(z.active()[0]);
    CHECK(apply_approx_transpose(z, q).isZero());
}

TEST_CASE("non-finite operator output is reported") {
    LinearAction<double> bad = [](const Vector& v) {
        Vector w = v;
        w[0] = std::numeric_limits<double>::quiet_NaN();
        return w;
    };
    CHECK_THROWS_AS(dam_update(DamFactorization<double>{}, Vector(Vector::Ones(5)), bad), NumericalError);
}

TEST_CASE("plan execution errors") {
    const Matrix a = Matrix::Identity(6, 6);
    const std::vector<Vector> one{Vector::Ones(6)};
    CHECK_THROWS_AS(run_dam(parse_plan("I 1 1\nI 2 1\n"), one, dense_action(a)), PlanError);
    CHECK_THROWS_AS(run_dam(parse_plan("I 1 1 0 0 0\n"), std::vector<Vector>{Vector::Ones(6)}, dense_action(a)),
                    PlanError);
    const auto masked = run_dam(parse_plan("I 1 0 1\n"), std::vector<Vector>{Vector::Ones(6)}, dense_action(a));
    CHECK_THROWS_AS(adjoint_action_fast(masked), ContractError);
    DamFactorization<double> f;
    f.append(Vector::Ones(6), dense_action(a));
    CHECK_THROWS_AS(f.append(Vector::Ones(5), dense_action(a)), ContractError);
}

TEST_CASE("single precision instantiation") {
    using Vf = VectorX<float>;
    using Mf = MatrixX<float>;
    const Mf a = oracle::random_matrix(8, 77).cast<float>();
    const Vf q = oracle::random_vector(8, 78).cast<float>();
    LinearAction<float> act = [&a](const Vf& v) { return Vf(a * v); };
    const auto fact = run_dam(classical_arnoldi_plan(8, 1), std::vector<Vf>{q}, act);
    CHECK(fact.eps_lin_dep() == doctest::Approx(std::max(1e-10f, 100 * std::numeric_limits<float>::epsilon())));
    const Vf exact = a.transpose() * q;
    CHECK((adjoint_action_fast(fact) - exact).norm() <= 1e-3f * exact.norm());
}
