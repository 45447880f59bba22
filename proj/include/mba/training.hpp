#pragma once

#include "mba/adjoint.hpp"

namespace mba {

/// One training sample: primal and adjoint state at a step, the reference
/// transposed action per operator part, and per part the input-3 vector: the
/// previous step's total reference action (empty when input 3 is not offered).
struct Snapshot {
    Vector q;
    Vector qstar;
    std::vector<Vector> targets;
    std::vector<Vector> previous;
};

struct SnapshotSet {
    std::vector<Snapshot> items;
    int stride = 5;
    bool split = false;

    bool has_previous() const { return !items.empty() && !items.front().previous.empty(); }
    int n_inputs() const { return has_previous() ? 3 : 2; }
};

/// Samples every `stride`-th step of a reference adjoint run, starting one
/// step before the terminal time.
SnapshotSet build_snapshots(const Trajectory& primal, const Trajectory& reference_adjoint,
                            const AdjointProblem& problem, int stride, bool offer_previous_rhs, bool split);

enum class MaskPolicy { IdentityOnly, SingleField, Full };

struct TrainerConfig {
    double quality_criterion = 1e-5;
    int max_lines = 12;
    MaskPolicy candidate_mask_policy = MaskPolicy::SingleField;
};

/// All lines that may be appended next, in lexicographic (source, index, mask) order.
std::vector<PlanLine> candidate_lines(int n_inputs, int pile_size, int n_fields, MaskPolicy policy);

/// Root mean square over snapshots of |A~^T q* - A^T q*| / |A^T q*|.
double plan_error(const CalculationPlan& plan, const SnapshotSet& snapshots, const AdjointProblem& problem);

struct TrainingResult {
    CalculationPlan plan;
    std::vector<double> error_history;  ///< error after each plan length, starting at one line
    bool converged = false;
    bool stagnated = false;
};

/// Greedy plan construction starting from the unmasked adjoint state.
TrainingResult train_plan(const SnapshotSet& snapshots, const AdjointProblem& problem, const TrainerConfig& cfg);

}  // namespace mba
