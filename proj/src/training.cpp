#include "mba/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mba {

namespace {

std::vector<RhsFunction> parts_of(const AdjointProblem& problem, bool split) {
    if (!split) return {problem.rhs};
    if (problem.parts.size() < 2) throw ConfigError("split training needs operator parts");
    return problem.parts;
}

std::vector<FieldMask> masks_for(int n_fields, MaskPolicy policy) {
    std::vector<FieldMask> masks{FieldMask::identity(n_fields)};
    if (policy == MaskPolicy::SingleField) {
        for (int slot = 0; slot < n_fields; ++slot)
            for (int src = 1; src <= n_fields; ++src) {
                std::vector<int> s(n_fields, 0);
                s[slot] = src;
                masks.emplace_back(std::move(s));
            }
    } else if (policy == MaskPolicy::Full) {
        std::vector<int> s(n_fields, 0);
        while (true) {
            masks.emplace_back(s);
            int i = n_fields - 1;
            while (i >= 0 && s[i] == n_fields) s[i--] = 0;
            if (i < 0) break;
            ++s[i];
        }
    }
    std::sort(masks.begin(), masks.end());
    masks.erase(std::unique(masks.begin(), masks.end()), masks.end());
    return masks;
}

/// Per-snapshot, per-part factorization state for incremental evaluation.
struct Workspace {
    std::vector<std::vector<DamFactorization<double>>> facts;
    std::vector<std::vector<Linearization>> lins;
    std::vector<std::vector<std::vector<Vector>>> inputs;
};

double relative_error(const Vector& approx, const Vector& target) {
    return (approx - target).norm() / target.norm();
}

double aggregate(const std::vector<double>& errs) {
    if (errs.empty()) throw ContractError("no snapshot with a nonzero reference action");
    double s = 0.0;
    for (double e : errs) s += e * e;
    return std::sqrt(s / static_cast<double>(errs.size()));
}

Vector combined_target(const Snapshot& s) {
    Vector t = s.targets.front();
    for (std::size_t p = 1; p < s.targets.size(); ++p) t += s.targets[p];
    return t;
}

}  // namespace

SnapshotSet build_snapshots(const Trajectory& primal, const Trajectory& reference_adjoint,
                            const AdjointProblem& problem, int stride, bool offer_previous_rhs, bool split) {
    if (stride < 1) throw ConfigError("snapshot stride must be >= 1");
    if (primal.time.n_steps != reference_adjoint.time.n_steps) throw ContractError("trajectory lengths differ");
    const auto parts = parts_of(problem, split);
    std::vector<ReferenceAdjoint> refs;
    for (const auto& p : parts) refs.emplace_back(p, problem.frechet);

    SnapshotSet set;
    set.stride = stride;
    set.split = split;
    const int n = primal.time.n_steps;
    std::vector<Vector> next_targets;
    for (int k = n - 1; k >= 1; k -= stride) {
        Snapshot s;
        s.q = primal.states[k];
        s.qstar = reference_adjoint.states[k];
        for (auto& r : refs) s.targets.push_back(r.apply(primal.states[k], reference_adjoint.states[k]));
        if (offer_previous_rhs) {
            Vector total = Vector::Zero(s.qstar.size());
            for (auto& r : refs) total += r.apply(primal.states[k + 1], reference_adjoint.states[k + 1]);
            s.previous.assign(refs.size(), total);
        }
        set.items.push_back(std::move(s));
    }
    if (set.items.empty()) throw ConfigError("trajectory too short for snapshot sampling");
    return set;
}

std::vector<PlanLine> candidate_lines(int n_inputs, int pile_size, int n_fields, MaskPolicy policy) {
    const auto masks = masks_for(n_fields, policy);
    std::vector<PlanLine> out;
    for (int i = 1; i <= n_inputs; ++i)
        for (const auto& m : masks) out.push_back({PlanSource::Input, i, m});
    for (int j = 1; j <= pile_size; ++j)
        for (const auto& m : masks) out.push_back({PlanSource::Pile, j, m});
    return out;
}

double plan_error(const CalculationPlan& plan, const SnapshotSet& snapshots, const AdjointProblem& problem) {
    plan.validate();
    if (!plan.starts_with_unmasked_first_input()) throw PlanError("plan must start with (I, 1, identity)", 0);
    const auto parts = parts_of(problem, snapshots.split);
    std::vector<double> errs;
    for (const auto& s : snapshots.items) {
        const Vector target = combined_target(s);
        if (target.norm() == 0.0) continue;
        Vector approx = Vector::Zero(target.size());
        for (std::size_t p = 0; p < parts.size(); ++p) {
            const Linearization lin(parts[p], s.q, problem.frechet);
            std::vector<Vector> inputs{s.qstar, s.q};
            if (!s.previous.empty()) inputs.push_back(s.previous[p]);
            approx += adjoint_action_fast(run_dam(plan, inputs, lin.action()));
        }
        errs.push_back(relative_error(approx, target));
    }
    return aggregate(errs);
}

TrainingResult train_plan(const SnapshotSet& snapshots, const AdjointProblem& problem, const TrainerConfig& cfg) {
    if (snapshots.items.empty()) throw ConfigError("training needs at least one snapshot");
    if (!(cfg.quality_criterion > 0.0)) throw ConfigError("quality criterion must be positive");
    if (cfg.max_lines < 1) throw ConfigError("max_lines must be >= 1");
    const auto parts = parts_of(problem, snapshots.split);
    const int n_fields = problem.n_fields;

    // Skip samples whose reference action vanishes; they carry no information.
    std::vector<const Snapshot*> samples;
    std::vector<Vector> targets;
    for (const auto& s : snapshots.items) {
        Vector t = combined_target(s);
        if (t.norm() > 0.0) {
            samples.push_back(&s);
            targets.push_back(std::move(t));
        }
    }
    if (samples.empty()) throw ContractError("no snapshot with a nonzero reference action");

    Workspace ws;
    ws.facts.resize(samples.size());
    ws.lins.resize(samples.size());
    ws.inputs.resize(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = *samples[i];
        for (std::size_t p = 0; p < parts.size(); ++p) {
            ws.lins[i].emplace_back(parts[p], s.q, problem.frechet);
            std::vector<Vector> in{s.qstar, s.q};
            if (!s.previous.empty()) in.push_back(s.previous[p]);
            ws.inputs[i].push_back(std::move(in));
            ws.facts[i].emplace_back();
        }
    }

    auto evaluate = [&](const PlanLine& line, bool commit) {
        std::vector<double> errs;
        errs.reserve(samples.size());
        for (std::size_t i = 0; i < samples.size(); ++i) {
            Vector approx = Vector::Zero(targets[i].size());
            for (std::size_t p = 0; p < parts.size(); ++p) {
                DamFactorization<double> trial = ws.facts[i][p];
                execute_plan_line(trial, line, std::span<const Vector>(ws.inputs[i][p]), ws.lins[i][p].action());
                approx += adjoint_action_fast(trial);
                if (commit) ws.facts[i][p] = std::move(trial);
            }
            errs.push_back(relative_error(approx, targets[i]));
        }
        return aggregate(errs);
    };

    TrainingResult result;
    std::vector<PlanLine> lines{{PlanSource::Input, 1, FieldMask::identity(n_fields)}};
    double current = evaluate(lines.front(), true);
    result.error_history.push_back(current);

    while (current >= cfg.quality_criterion && static_cast<int>(lines.size()) < cfg.max_lines) {
        const auto candidates =
            candidate_lines(snapshots.n_inputs(), static_cast<int>(lines.size()), n_fields, cfg.candidate_mask_policy);
        double best = std::numeric_limits<double>::infinity();
        const PlanLine* best_line = nullptr;
        for (const auto& c : candidates) {
            const double e = evaluate(c, false);
            if (e < best) {
                best = e;
                best_line = &c;
            }
        }
        if (best_line == nullptr || !(best < current)) {
            result.stagnated = true;
            break;
        }
        lines.push_back(*best_line);
        current = evaluate(*best_line, true);
        result.error_history.push_back(current);
    }
    result.plan = CalculationPlan(std::move(lines));
    result.converged = current < cfg.quality_criterion;
    return result;
}

}  // namespace mba
