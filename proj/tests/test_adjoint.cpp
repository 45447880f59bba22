#include <doctest.h>

#include "mba/adjoint.hpp"
#include "oracles.hpp"

using namespace mba;

namespace {

struct BurgersSetup {
    BurgersParams params;
    AdjointProblem problem;
    Trajectory primal;
};

BurgersSetup burgers_setup(Eigen::Index n, double mu, int n_steps, double amp = 0.05, bool central = false) {
    BurgersSetup s;
    s.params.grid = Grid(n, 2.0 * std::numbers::pi, true);
    s.params.mu = mu;
    const auto p = s.params;
    s.problem.rhs = [p](const Vector& u) { return burgers_rhs(u, p); };
    s.problem.parts = {[p](const Vector& u) { return burgers_transport_rhs(u, p); },
                       [p](const Vector& u) { return burgers_friction_rhs(u, p); }};
    s.problem.analytic_rhs = [p](const Vector& us, const Vector& u0) { return burgers_adjoint_analytic_rhs(us, u0, p); };
    s.problem.field_names = {"u"};
    s.problem.frechet.central = central;
    Vector u0(n);
    for (Eigen::Index i = 0; i < n; ++i) u0[i] = 0.5 + amp * std::sin(p.grid.x(i));
    TimeGrid tg{n_steps, cfl_dt(0.5 + amp, p.grid.dx(), 0.5), 0.0};
    s.primal = run_primal(s.problem.rhs, u0, tg, 1, {}, {"u"});
    return s;
}

Vector gaussian_terminal(const Grid& g) { return terminal_gaussian(GaussianIC{g.length / 2, 15.0 * 64 / g.n, 0.5, 0}, g, 1); }

AdjointResult run(const BurgersSetup& s, AdjointMode mode, const Vector& terminal) {
    AdjointRunConfig cfg;
    cfg.mode = std::move(mode);
    cfg.terminal_condition = terminal;
    return run_adjoint(s.primal, cfg, s.problem);
}

double max_rel(const Trajectory& a, const Trajectory& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < a.states.size(); ++k) {
        num = std::max(num, (a.states[k] - b.states[k]).cwiseAbs().maxCoeff());
        den = std::max(den, b.states[k].cwiseAbs().maxCoeff());
    }
    return num / den;
}

}  // namespace

TEST_CASE("primal runner records every step") {
    const auto s = burgers_setup(32, 0.0, 10);
    CHECK(s.primal.states.size() == 11);
    CHECK(s.primal.n_grid() == 32);
    CHECK_NOTHROW(s.primal.validate());
    CHECK_THROWS_AS(run_primal(s.problem.rhs, s.primal.states[0], TimeGrid{5, 0.0, 0.0}, 1), ConfigError);
}

TEST_CASE("primal failures carry the step index") {
    EulerParams p;
    p.grid = Grid(16, 1.0, true);
    RhsFunction rhs = [p](const Vector& q) { return euler_rhs(q, p); };
    Vector q = uniform_euler_state(p.grid, 1.0, 0.0, 1.5);
    q[2] = -1.0;
    try {
        run_primal(rhs, q, TimeGrid{3, 0.01, 0.0}, 3);
        FAIL("expected a state error");
    } catch (const StateError& e) {
        CHECK(e.position() == 0);
    }
}

TEST_CASE("zero terminal condition stays zero in every mode") {
    const auto s = burgers_setup(32, 0.0, 20);
    const Vector zero = Vector::Zero(32);
    for (AdjointMode mode : {AdjointMode{Reference{}}, AdjointMode{AnalyticBurgers{}},
                             AdjointMode{ModeBased{published_plan("B1"), std::nullopt, false}}}) {
        const auto r = run(s, mode, zero);
        for (const auto& st : r.adjoint.states) CHECK(st.isZero());
    }
}

TEST_CASE("full-span plan reproduces the reference adjoint on an eight-point system") {
    // Two-sided differences are exact on the quadratic flux, so both modes see the same operator.
    const auto s = burgers_setup(8, 0.0, 30, 0.2, true);
    Vector terminal = oracle::random_vector(8, 4);
    const auto ref = run(s, Reference{}, terminal);
    for (bool reuse : {false, true}) {
        AdjointRunConfig cfg;
        cfg.mode = ModeBased{classical_arnoldi_plan(8, 1), std::nullopt, false};
        cfg.terminal_condition = terminal;
        cfg.reuse_factorization_within_step = reuse;
        const auto mb = run_adjoint(s.primal, cfg, s.problem);
        CHECK(max_rel(mb.adjoint, ref.adjoint) <= 1e-8);
        CHECK(mb.fallbacks == 0);
    }
}

TEST_CASE("redundant plan lines leave the step unchanged") {
    const auto s = burgers_setup(64, 0.0, 40);
    const Vector qstar = gaussian_terminal(s.params.grid);
    const Vector& q = s.primal.states[20];
    ModeStepOptions opt;
    opt.t = s.primal.time.time(20);
    opt.dt = s.primal.time.dt;
    for (bool reuse : {false, true}) {
        opt.reuse_factorization = reuse;
        const auto base = adjoint_step_mode_based(qstar, q, {}, published_plan("B1"), s.problem, opt);
        const auto padded =
            adjoint_step_mode_based(qstar, q, {}, parse_plan("I 1 1\nP 1 1\nI 1 1\nI 1 1\n"), s.problem, opt);
        CHECK((base.qstar_next - padded.qstar_next).norm() <= 1e-10 * base.qstar_next.norm());
    }
}

TEST_CASE("one step satisfies discrete duality with the linear propagator") {
    const auto s = burgers_setup(24, 7.5e-3, 1);
    const Matrix a = build_full_operator(s.problem.rhs, s.primal.states[1], s.problem.frechet);
    const double dt = s.primal.time.dt;
    auto forward = [&](double, const Vector& v) { return Vector(a * v); };
    for (unsigned seed = 0; seed < 3; ++seed) {
        const Vector q = oracle::random_vector(24, seed);
        const Vector y = oracle::random_vector(24, 10 + seed);
        const Vector lq = rk4_step(forward, q, 0.0, dt);
        const auto adj = run(s, Reference{}, y);
        const double lhs = lq.dot(y), rhs = q.dot(adj.adjoint.states[0]);
        CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(lhs)));
    }
}

TEST_CASE("plans that need the previous right side require a first-step plan") {
    const auto s = burgers_setup(32, 0.0, 5);
    ModeStepOptions opt;
    opt.dt = s.primal.time.dt;
    const Vector qstar = gaussian_terminal(s.params.grid);
    CHECK_THROWS_AS(adjoint_step_mode_based(qstar, s.primal.states[5], {}, published_plan("B2"), s.problem, opt),
                    ConfigError);
    const auto first = classical_arnoldi_plan(4, 1);
    opt.first_step_plan = &first;
    CHECK_NOTHROW(adjoint_step_mode_based(qstar, s.primal.states[5], {}, published_plan("B2"), s.problem, opt));
    CHECK_THROWS_AS(adjoint_step_mode_based(qstar, s.primal.states[5], {}, parse_plan("I 2 1\nI 1 1\n"), s.problem, opt),
                    ConfigError);
    opt.dt = 0.0;
    CHECK_THROWS_AS(adjoint_step_mode_based(qstar, s.primal.states[5], {}, published_plan("B1"), s.problem, opt),
                    ContractError);
}

TEST_CASE("previous right side plan runs through a whole trajectory") {
    const auto s = burgers_setup(64, 0.0, 40);
    const Vector terminal = gaussian_terminal(s.params.grid);
    const auto ref = run(s, Reference{}, terminal);
    const auto mb = run(s, ModeBased{published_plan("B2"), std::nullopt, false}, terminal);
    CHECK(max_rel(mb.adjoint, ref.adjoint) <= 2e-2);
    CHECK(mb.rhs_values[40].size() == 1);
    CHECK(mb.rhs_values[0].empty());
    CHECK(mb.dam_runs > 0);
}

TEST_CASE("split adjoint runs one factorization per operator part") {
    const auto s = burgers_setup(64, 7.5e-3, 20);
    const Vector terminal = gaussian_terminal(s.params.grid);
    const auto ref = run(s, Reference{}, terminal);
    const auto mb = run(s, ModeBased{classical_arnoldi_plan(6, 1), std::nullopt, true}, terminal);
    CHECK(mb.rhs_values[20].size() == 2);
    CHECK(max_rel(mb.adjoint, ref.adjoint) <= 1e-2);

    auto no_parts = s;
    no_parts.problem.parts.clear();
    CHECK_THROWS_AS(run(no_parts, ModeBased{published_plan("B1"), std::nullopt, true}, terminal), ConfigError);
}

TEST_CASE("first-input plan reproduces the reference on pure advection") {
    const auto s = burgers_setup(64, 0.0, 60, 0.0);
    const Vector terminal = gaussian_terminal(s.params.grid);
    const auto ref = run(s, Reference{}, terminal);
    const auto mb = run(s, ModeBased{published_plan("B1"), std::nullopt, false}, terminal);
    CHECK(max_rel(mb.adjoint, ref.adjoint) <= 1e-5);
}

TEST_CASE("reference adjoint agrees with the analytic adjoint") {
    const auto s = burgers_setup(128, 0.0, 100);
    const Vector terminal = gaussian_terminal(s.params.grid);
    const auto ref = run(s, Reference{}, terminal);
    const auto ana = run(s, AnalyticBurgers{}, terminal);
    CHECK(max_rel(ana.adjoint, ref.adjoint) <= 1e-5);

    auto no_analytic = s;
    no_analytic.problem.analytic_rhs = nullptr;
    CHECK_THROWS_AS(run(no_analytic, AnalyticBurgers{}, terminal), ConfigError);
}

TEST_CASE("adjoint source enters with the backward sign") {
    // With a zero operator, dq*/dt = -g integrates backward to q*(0) = q*(T) + g T.
    const Grid g(8, 1.0, true);
    AdjointProblem prob;
    prob.rhs = [](const Vector& q) { return Vector(Vector::Zero(q.size())); };
    Trajectory primal;
    primal.time = TimeGrid{10, 0.1, 0.0};
    primal.states.assign(11, Vector::Ones(8));
    AdjointRunConfig cfg;
    cfg.terminal_condition = Vector::Zero(8);
    cfg.source_g = [](double) { return Vector(Vector::Constant(8, 2.0)); };
    const auto r = run_adjoint(primal, cfg, prob);
    CHECK((r.adjoint.states[0] - Vector::Constant(8, 2.0)).cwiseAbs().maxCoeff() <= 1e-12);
    cfg.terminal_condition = Vector::Zero(7);
    CHECK_THROWS_AS(run_adjoint(primal, cfg, prob), ContractError);
}

TEST_CASE("terminal Gaussian") {
    const Grid g(128, 2.0 * std::numbers::pi, true);
    const Vector q = terminal_gaussian(GaussianIC{std::numbers::pi, 15.0, 0.5, 0}, g, 1);
    Eigen::Index i = 0;
    CHECK(q.maxCoeff(&i) == doctest::Approx(0.5));
    CHECK(i == 64);
    CHECK(q[64 + 15] == doctest::Approx(0.5 * std::exp(-1.0)));

    const Vector e = terminal_gaussian(GaussianIC{std::numbers::pi, 10.0, 5.0, 2}, g, 3);
    CHECK(e.head(256).isZero());
    CHECK(e[256 + 64] == doctest::Approx(5.0));
    CHECK_THROWS_AS(terminal_gaussian(GaussianIC{0.0, 0.0, 1.0, 0}, g, 1), ConfigError);
    CHECK_THROWS_AS(terminal_gaussian(GaussianIC{0.0, 1.0, 1.0, 3}, g, 3), ConfigError);
}
