#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "mba/optimize.hpp"
#include "mba/training.hpp"

namespace mba {

enum class ModelKind { Burgers, Euler };

struct ScenarioConfig {
    std::string case_id = "custom";
    ModelKind model = ModelKind::Burgers;

    // grid and time
    Eigen::Index n = 128;
    double length = 2.0 * std::numbers::pi;
    bool periodic = true;
    int order = 4;
    double cfl = 0.5;
    int n_steps = 256;
    int resolution_scale = 1;  ///< multiplies n and n_steps

    // Burgers: u(x, 0) = u_mean + u_amplitude sin(2 pi x / L)
    double mu = 0.0;
    double u_mean = 0.5;
    double u_amplitude = 0.0;

    // Euler base state; u0 = u0_mach * c when u0_mach is nonzero
    double gamma = 1.4;
    double rho0 = 1.0;
    double u0 = 0.0;
    double u0_mach = 0.0;
    double p0 = 1.5;
    /// Peak sponge rate in units of (|u0| + c) / (fraction L).
    double sponge_strength = 16.0;
    double sponge_fraction = 0.1;
    bool source = false;
    double source_frequency = 0.75;
    double source_location_fraction = 0.25;
    double source_amplitude = 5e-4;
    double source_width_cells = 4.0;

    // terminal adjoint Gaussian
    double terminal_amplitude = 0.5;
    double terminal_width_cells = 15.0;
    double terminal_center_fraction = 0.5;
    int terminal_field = 0;

    // adjoint
    std::vector<std::string> modes{"mode_based", "reference"};
    std::string plan_source = "builtin";  ///< builtin | train | path to a plan file
    std::string builtin_plan;             ///< defaults to case_id
    bool split = false;
    bool reuse_factorization = false;
    double frechet_epsilon = std::sqrt(std::numeric_limits<double>::epsilon());
    bool frechet_central = false;

    // training
    int snapshot_stride = 5;
    bool offer_previous_rhs = false;
    double criterion = 1e-5;
    int max_lines = 12;
    MaskPolicy mask_policy = MaskPolicy::SingleField;

    // noise objective
    double p_target = 1.5;
    double alpha = 2.5;
    double sigma_edge_fraction = 0.75;
    double sigma_smooth_cells = 5.0;
    double theta_center_fraction = 0.5;
    double theta_width_cells = 10.0;
    int n_iters = 5;

    std::string output_dir;

    void validate() const;
};

/// B1, B2, B3, E1, E2, E3, E4, O1.
ScenarioConfig builtin_case(const std::string& id);
std::vector<std::string> builtin_case_ids();

/// INI file with [case], [grid], [time], [model], [terminal], [adjoint],
/// [training], [objective] and [output] sections. A `case.id` entry selects
/// the builtin defaults that the remaining keys override.
ScenarioConfig load_config(const std::string& path);
void apply_config_text(ScenarioConfig& cfg, const std::string& ini_text);

/// Fully resolved numerical setup of a scenario.
struct CaseSetup {
    Grid grid;
    TimeGrid time;
    Vector initial;
    Vector terminal;
    AdjointProblem problem;
    RhsFunction primal_rhs;
    TimeSource primal_forcing;
    std::optional<BurgersParams> burgers;
    std::optional<EulerParams> euler;
    double wave_speed = 0.0;  ///< speed used in the CFL condition
};

CaseSetup build_case(const ScenarioConfig& cfg);

struct FieldError {
    std::string name;
    double max_abs = 0.0;
    double ref_max = 0.0;
    double max_relative = 0.0;  ///< max_abs / ref_max, global reference max when the field is zero
    double l2_relative = 0.0;
};

struct Comparison {
    std::string label;
    double max_relative = 0.0;         ///< all fields together
    double l2_relative = 0.0;
    double scaled_max_relative = 0.0;  ///< largest per-field error under per-field scaling
    std::vector<FieldError> fields;
    std::vector<double> step_max_abs;
};

/// Difference of `a` against reference `b`; headers must match.
Comparison compare_trajectories(const Trajectory& a, const Trajectory& b, std::string label = "a vs b");

struct ErrorReport {
    std::string case_id;
    std::vector<Comparison> comparisons;

    const Comparison* find(const std::string& label) const;
};

void write_report_csv(const ErrorReport& report, const std::string& path);
void write_step_errors_csv(const ErrorReport& report, const TimeGrid& time, const std::string& path);

struct CaseRun {
    ScenarioConfig cfg;
    CaseSetup setup;
    Trajectory primal;
    std::optional<CalculationPlan> plan;
    std::map<std::string, AdjointResult> adjoints;
    ErrorReport report;
};

/// Resolves the plan named by the config, training it on a reference run if asked.
CalculationPlan resolve_plan(const ScenarioConfig& cfg);

/// Primal run, adjoint runs for each requested mode and pairwise comparisons.
/// Writes artifacts when cfg.output_dir is set.
CaseRun run_case(const ScenarioConfig& cfg);

struct CaseTraining {
    TrainingResult result;
    SnapshotSet snapshots;
};

CaseTraining train_case(const ScenarioConfig& cfg);

NoiseProblem build_noise_problem(const ScenarioConfig& cfg);
AdjointMode adjoint_mode_for(const std::string& name, const ScenarioConfig& cfg, const CalculationPlan* plan);

/// max |p*| inside the sponge-free interior at the earliest time divided by the
/// largest |p*| seen at the sponge edges over the run.
double boundary_reflection_ratio(const Trajectory& adjoint, const Grid& grid, double sponge_fraction);

/// First step index k, counting down from n_steps, at which the adjoint
/// pressure at either sponge edge exceeds `threshold` of its terminal peak.
int first_boundary_contact_step(const Trajectory& adjoint, const Grid& grid, double sponge_fraction,
                                double threshold = 1e-3);

/// Steps [k_begin, k_end] of a trajectory, re-based so step 0 is k_begin.
Trajectory slice_steps(const Trajectory& traj, int k_begin, int k_end);

}  // namespace mba
