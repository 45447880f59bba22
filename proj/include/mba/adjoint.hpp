#pragma once

#include <functional>
#include <optional>
#include <variant>

#include "mba/dam.hpp"
#include "mba/linearize.hpp"
#include "mba/trajectory.hpp"

namespace mba {

/// Time-dependent state-shaped term (primal forcing f or adjoint source g).
using TimeSource = std::function<Vector(double t)>;

/// Everything the adjoint engine needs to know about a model.
struct AdjointProblem {
    RhsFunction rhs;
    /// Operator-split pieces summing to rhs; used by split mode-based runs.
    std::vector<RhsFunction> parts;
    int n_fields = 1;
    std::vector<std::string> field_names;
    FrechetConfig frechet;
    /// Right side of a continuous adjoint, (q*, q0) -> dq*/dt without source.
    std::function<Vector(const Vector&, const Vector&)> analytic_rhs;
};

struct ModeBased {
    CalculationPlan plan;
    /// Used on the first backward step when `plan` needs the previous RHS, and
    /// for any evaluation where `plan` collapses onto q* alone.
    std::optional<CalculationPlan> first_step_plan;
    bool split = false;
};
struct Reference {};
struct AnalyticBurgers {};
using AdjointMode = std::variant<ModeBased, Reference, AnalyticBurgers>;

struct AdjointRunConfig {
    AdjointMode mode = Reference{};
    Vector terminal_condition;
    TimeSource source_g;
    /// Freeze one factorization per backward step for all Runge-Kutta stages.
    bool reuse_factorization_within_step = false;
};

struct AdjointResult {
    Trajectory adjoint;
    /// Transposed action on q*_k at the start of each backward step, per
    /// operator part; entry k is empty for k = 0.
    std::vector<std::vector<Vector>> rhs_values;
    long rhs_calls = 0;
    long dam_runs = 0;
    long fallbacks = 0;  ///< evaluations that switched to the first-step plan
};

Trajectory run_primal(const RhsFunction& rhs, const Vector& ic, const TimeGrid& tg, int n_fields,
                      const TimeSource& forcing = {}, std::vector<std::string> field_names = {});

struct ModeStepOptions {
    double t = 0.0;
    double dt = 0.0;  ///< positive magnitude; the step runs from t to t - dt
    bool split = false;
    bool reuse_factorization = true;
    TimeSource source_g;
    const CalculationPlan* first_step_plan = nullptr;
};

struct ModeStepResult {
    Vector qstar_next;
    std::vector<Vector> rhs_values;  ///< per part
    long rhs_calls = 0;
    long dam_runs = 0;
    long fallbacks = 0;
};

/// One backward step of dq*/dt = -A~^T q* - g with the modal transposed
/// operator built from U = (q*, q, previous RHS). `prev_rhs` holds the input-3
/// vector for each operator part; run_adjoint passes the previous step's total
/// transposed action to every part.
ModeStepResult adjoint_step_mode_based(const Vector& qstar, const Vector& primal_snapshot,
                                       const std::vector<Vector>& prev_rhs, const CalculationPlan& plan,
                                       const AdjointProblem& problem, const ModeStepOptions& opt);

AdjointResult run_adjoint(const Trajectory& primal, const AdjointRunConfig& cfg, const AdjointProblem& problem);

struct GaussianIC {
    double center = 0.0;
    double width_cells = 15.0;
    double amplitude = 0.5;
    int field = 0;  ///< zero-based field receiving the pulse
};

/// amplitude * exp(-((x - center)/(width dx))^2) in one field, zeros elsewhere.
Vector terminal_gaussian(const GaussianIC& g, const Grid& grid, int n_fields);

}  // namespace mba
