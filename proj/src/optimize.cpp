#include "mba/optimize.hpp"

#include <fstream>
#include <iomanip>

namespace mba {

ObjectiveSpec make_noise_objective(const Grid& grid, double p_target, double alpha, double sigma_edge,
                                   double sigma_smooth_cells, double theta_center, double theta_width_cells) {
    if (!(sigma_smooth_cells > 0.0) || !(theta_width_cells > 0.0)) throw ConfigError("region widths must be positive");
    ObjectiveSpec s;
    s.p_target = p_target;
    s.alpha = alpha;
    s.sigma.resize(grid.n);
    s.theta.resize(grid.n);
    const double ws = sigma_smooth_cells * grid.dx();
    const double wt = theta_width_cells * grid.dx();
    for (Eigen::Index i = 0; i < grid.n; ++i) {
        const double x = grid.x(i);
        s.sigma[i] = 0.5 * (1.0 + std::erf((x - sigma_edge) / ws));
        const double d = (x - theta_center) / wt;
        s.theta[i] = std::exp(-d * d);
    }
    return s;
}

ControlField ControlField::zeros(const TimeGrid& time, Eigen::Index n_grid) {
    ControlField f;
    f.time = time;
    f.values.assign(time.n_steps + 1, Vector::Zero(n_grid));
    return f;
}

Vector ControlField::at(double t) const {
    const double s = (t - time.t0) / time.dt;
    const int last = time.n_steps;
    if (s <= 0.0) return values.front();
    if (s >= last) return values.back();
    const int k = std::min(static_cast<int>(s), last - 1);
    const double w = s - k;
    return (1.0 - w) * values[k] + w * values[k + 1];
}

namespace {

Vector pressure_of(const Vector& q, Eigen::Index n) { return q.segment(2 * n, n); }

}  // namespace

double objective(const Trajectory& primal, const ObjectiveSpec& spec, const Grid& grid) {
    if (primal.n_fields != kEulerFields) throw ContractError("objective expects (rho, u, p) trajectories");
    const Eigen::Index n = grid.n;
    if (spec.sigma.size() != n) throw ContractError("objective weight does not match the grid");
    double j = 0.0;
    const int last = primal.time.n_steps;
    for (int k = 0; k <= last; ++k) {
        const double w = (k == 0 || k == last) ? 0.5 : 1.0;
        const Vector d = pressure_of(primal.states[k], n).array() - spec.p_target;
        j += w * (spec.sigma.array() * d.array().square()).sum();
    }
    return j * grid.dx() * primal.time.dt;
}

TimeSource adjoint_source_g(const Trajectory& primal, const ObjectiveSpec& spec) {
    const Eigen::Index n = spec.sigma.size();
    ControlField g;
    g.time = primal.time;
    for (const auto& q : primal.states)
        g.values.push_back(2.0 * (pressure_of(q, n).array() - spec.p_target).matrix().cwiseProduct(spec.sigma));
    return [g, n](double t) {
        Vector full = Vector::Zero(kEulerFields * n);
        full.segment(2 * n, n) = g.at(t);
        return full;
    };
}

ControlField gradient_update(const ControlField& f, const Trajectory& adjoint, const ObjectiveSpec& spec) {
    if (adjoint.states.size() != f.values.size()) throw ContractError("control and adjoint lengths differ");
    const Eigen::Index n = spec.theta.size();
    ControlField out = f;
    for (std::size_t k = 0; k < out.values.size(); ++k)
        out.values[k] -= spec.alpha * spec.theta.cwiseProduct(pressure_of(adjoint.states[k], n));
    return out;
}

AdjointProblem noise_adjoint_problem(const NoiseProblem& np) {
    AdjointProblem prob;
    const EulerParams params = np.params;
    prob.rhs = [params](const Vector& q) { return euler_open_rhs(q, params); };
    prob.n_fields = kEulerFields;
    prob.field_names = {"rho", "u", "p"};
    prob.frechet = np.frechet;
    return prob;
}

Trajectory run_noise_primal(const NoiseProblem& np, const ControlField& control) {
    const Eigen::Index n = np.params.grid.n;
    const EulerParams params = np.params;
    auto rhs = [params](const Vector& q) { return euler_open_rhs(q, params); };
    auto forcing = [&](double t) {
        Vector f = Vector::Zero(kEulerFields * n);
        if (params.forcing) f.segment(2 * n, n) += pressure_source_eval(*params.forcing, params.grid, t);
        f.segment(2 * n, n) += control.at(t);
        return f;
    };
    return run_primal(rhs, np.initial, np.time, kEulerFields, forcing, {"rho", "u", "p"});
}

OptimizationReport optimize_noise(const NoiseProblem& np, const AdjointMode& mode, int n_iters) {
    if (n_iters < 0) throw ConfigError("iteration count must be nonnegative");
    const AdjointProblem prob = noise_adjoint_problem(np);
    OptimizationReport rep;
    rep.control = ControlField::zeros(np.time, np.params.grid.n);
    for (int it = 0;; ++it) {
        rep.final_primal = run_noise_primal(np, rep.control);
        rep.objective.push_back(objective(rep.final_primal, np.objective, np.params.grid));
        if (it == n_iters) break;
        AdjointRunConfig cfg;
        cfg.mode = mode;
        cfg.terminal_condition = Vector::Zero(np.initial.size());
        cfg.source_g = adjoint_source_g(rep.final_primal, np.objective);
        cfg.reuse_factorization_within_step = np.reuse_factorization;
        const auto adj = run_adjoint(rep.final_primal, cfg, prob);
        rep.control = gradient_update(rep.control, adj.adjoint, np.objective);
    }
    for (double j : rep.objective) rep.normalized.push_back(rep.objective.front() > 0 ? j / rep.objective.front() : j);
    for (std::size_t i = 2; i < rep.objective.size(); ++i)
        if (rep.objective[i] > rep.objective[i - 1] && rep.objective[i - 1] > rep.objective[i - 2])
            rep.increased_twice = true;
    return rep;
}

void write_optimization_csv(const OptimizationReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << std::setprecision(12) << "iteration,J,J_normalized\n";
    for (std::size_t i = 0; i < report.objective.size(); ++i)
        out << i << ',' << report.objective[i] << ',' << report.normalized[i] << '\n';
}

}  // namespace mba
