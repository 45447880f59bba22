#pragma once

#include "mba/adjoint.hpp"

namespace mba {

/// J = integral over time and space of sigma(x) (p - p_target)^2.
struct ObjectiveSpec {
    double p_target = 1.5;
    Vector sigma;  ///< spatial weight on the evaluation region
    Vector theta;  ///< spatial shape of the control region
    double alpha = 2.5;
};

/// sigma: smoothed step rising at `sigma_edge`; theta: Gaussian at `theta_center`.
ObjectiveSpec make_noise_objective(const Grid& grid, double p_target, double alpha, double sigma_edge,
                                   double sigma_smooth_cells, double theta_center, double theta_width_cells);

/// Pressure-field control sampled on the time nodes, linearly interpolated in between.
struct ControlField {
    TimeGrid time;
    std::vector<Vector> values;  ///< n_steps + 1 pressure profiles

    static ControlField zeros(const TimeGrid& time, Eigen::Index n_grid);
    Vector at(double t) const;
};

/// Trapezoidal rule in time, dx-weighted sum in space.
double objective(const Trajectory& primal, const ObjectiveSpec& spec, const Grid& grid);

/// g(t) = 2 (p - p_target) sigma in the pressure slot, zero in the other fields.
TimeSource adjoint_source_g(const Trajectory& primal, const ObjectiveSpec& spec);

/// Steepest descent step f <- f - alpha theta p*.
ControlField gradient_update(const ControlField& f, const Trajectory& adjoint, const ObjectiveSpec& spec);

/// Open-boundary Euler setup with a harmonic pressure source to be cancelled.
struct NoiseProblem {
    EulerParams params;
    Vector initial;
    TimeGrid time;
    ObjectiveSpec objective;
    FrechetConfig frechet;
    bool reuse_factorization = false;
};

AdjointProblem noise_adjoint_problem(const NoiseProblem& np);
Trajectory run_noise_primal(const NoiseProblem& np, const ControlField& control);

struct OptimizationReport {
    std::vector<double> objective;     ///< J at iterations 0..n_iters; entry 0 is the uncontrolled run
    std::vector<double> normalized;    ///< objective / objective[0]
    ControlField control;
    Trajectory final_primal;
    bool increased_twice = false;      ///< J rose on two consecutive iterations
};

OptimizationReport optimize_noise(const NoiseProblem& np, const AdjointMode& mode, int n_iters);

void write_optimization_csv(const OptimizationReport& report, const std::string& path);

}  // namespace mba
