#include "mba/adjoint.hpp"

#include <algorithm>

namespace mba {

Trajectory run_primal(const RhsFunction& rhs, const Vector& ic, const TimeGrid& tg, int n_fields,
                      const TimeSource& forcing, std::vector<std::string> field_names) {
    if (tg.n_steps < 0 || !(tg.dt > 0.0)) throw ConfigError("time grid needs n_steps >= 0 and dt > 0");
    Trajectory traj;
    traj.time = tg;
    traj.n_fields = n_fields;
    traj.field_names = std::move(field_names);
    traj.states.reserve(tg.n_steps + 1);
    traj.states.push_back(ic);
    auto f = [&](double t, const Vector& y) -> Vector {
        if (forcing) return rhs(y) + forcing(t);
        return rhs(y);
    };
    for (int k = 0; k < tg.n_steps; ++k) {
        Vector next;
        try {
            next = rk4_step(f, traj.states.back(), tg.time(k), tg.dt);
        } catch (const StateError& e) {
            throw StateError(std::string("primal step failed: ") + e.what(), k);
        } catch (const NumericalError& e) {
            throw NumericalError(std::string("primal step failed: ") + e.what(), k);
        }
        if (!next.allFinite()) throw NumericalError("non-finite primal state", k + 1);
        traj.states.push_back(std::move(next));
    }
    return traj;
}

namespace {

std::vector<RhsFunction> operator_parts(const AdjointProblem& problem, bool split) {
    if (!split) return {problem.rhs};
    if (problem.parts.size() < 2) throw ConfigError("split adjoint needs at least two operator parts");
    return problem.parts;
}

std::vector<Vector> dam_inputs(const Vector& qstar, const Vector& q, const std::vector<Vector>& prev, std::size_t part) {
    std::vector<Vector> inputs{qstar, q};
    if (!prev.empty()) inputs.push_back(prev[part]);
    return inputs;
}

}  // namespace

ModeStepResult adjoint_step_mode_based(const Vector& qstar, const Vector& primal_snapshot,
                                       const std::vector<Vector>& prev_rhs, const CalculationPlan& plan,
                                       const AdjointProblem& problem, const ModeStepOptions& opt) {
    if (!plan.starts_with_unmasked_first_input())
        throw ConfigError("mode-based plan must start with (I, 1, identity)");
    if (!(opt.dt > 0.0)) throw ContractError("step size must be positive");
    const auto parts = operator_parts(problem, opt.split);
    if (!prev_rhs.empty() && prev_rhs.size() != parts.size())
        throw ContractError("previous RHS count differs from operator part count");

    std::vector<Linearization> lins;
    lins.reserve(parts.size());
    for (const auto& part : parts) lins.emplace_back(part, primal_snapshot, problem.frechet);

    ModeStepResult result;
    const CalculationPlan* main_plan = &plan;
    if (prev_rhs.empty() && plan.max_input_index() >= 3) {
        if (opt.first_step_plan == nullptr)
            throw ConfigError("plan uses the previous RHS (input 3) but no first-step plan is configured");
        main_plan = opt.first_step_plan;
    }
    if (opt.first_step_plan != nullptr && !opt.first_step_plan->starts_with_unmasked_first_input())
        throw ConfigError("first-step plan must start with (I, 1, identity)");

    // A plan trained on developed adjoint states can collapse onto q* alone,
    // e.g. on a terminal condition whose masked fields are still zero. Such a
    // factorization only represents a multiple of q*; fall back to the
    // first-step plan for that evaluation.
    auto factorize = [&](const Vector& y, std::size_t p) {
        auto fact = run_dam(*main_plan, dam_inputs(y, primal_snapshot, prev_rhs, p), lins[p].action());
        ++result.dam_runs;
        const auto n_active = std::count(fact.active().begin(), fact.active().end(), true);
        if (n_active <= 1 && main_plan->size() > 1 && opt.first_step_plan != nullptr && y.norm() > 0.0 &&
            opt.first_step_plan->max_input_index() < 3) {
            fact = run_dam(*opt.first_step_plan, dam_inputs(y, primal_snapshot, prev_rhs, p), lins[p].action());
            ++result.dam_runs;
            ++result.fallbacks;
        }
        return fact;
    };

    auto source = [&](double t) -> Vector {
        return opt.source_g ? opt.source_g(t) : Vector::Zero(qstar.size());
    };

    if (opt.reuse_factorization) {
        std::vector<ModalTranspose<double>> modal;
        for (std::size_t p = 0; p < parts.size(); ++p) {
            const auto fact = factorize(qstar, p);
            result.rhs_values.push_back(adjoint_action_fast(fact));
            modal.emplace_back(fact);
        }
        auto rhs = [&](double t, const Vector& y) -> Vector {
            Vector r = -source(t);
            for (const auto& m : modal) r -= m(y);
            return r;
        };
        result.qstar_next = rk4_step(rhs, qstar, opt.t, -opt.dt);
    } else {
        bool first_stage = true;
        auto rhs = [&](double t, const Vector& y) -> Vector {
            Vector r = -source(t);
            for (std::size_t p = 0; p < parts.size(); ++p) {
                Vector action = adjoint_action_fast(factorize(y, p));
                r -= action;
                if (first_stage) result.rhs_values.push_back(std::move(action));
            }
            first_stage = false;
            return r;
        };
        result.qstar_next = rk4_step(rhs, qstar, opt.t, -opt.dt);
    }
    for (const auto& l : lins) result.rhs_calls += l.rhs_calls() + 1;
    return result;
}

AdjointResult run_adjoint(const Trajectory& primal, const AdjointRunConfig& cfg, const AdjointProblem& problem) {
    primal.validate();
    const int n_steps = primal.time.n_steps;
    const double dt = primal.time.dt;
    if (cfg.terminal_condition.size() != primal.states.front().size())
        throw ContractError("terminal condition shape differs from primal state");

    AdjointResult out;
    out.adjoint.time = primal.time;
    out.adjoint.n_fields = primal.n_fields;
    out.adjoint.field_names = problem.field_names;
    for (auto& name : out.adjoint.field_names) name += "*";
    out.adjoint.states.assign(n_steps + 1, Vector());
    out.adjoint.states[n_steps] = cfg.terminal_condition;
    out.rhs_values.assign(n_steps + 1, {});

    auto source = [&](double t) -> Vector {
        return cfg.source_g ? cfg.source_g(t) : Vector::Zero(cfg.terminal_condition.size());
    };

    auto wrap = [](int k, auto&& body) {
        try {
            body();
        } catch (const StateError& e) {
            throw StateError(std::string("adjoint step failed: ") + e.what(), k);
        } catch (const PlanError&) {
            throw;
        } catch (const NumericalError& e) {
            throw NumericalError(std::string("adjoint step failed: ") + e.what(), k);
        }
    };

    if (const auto* mb = std::get_if<ModeBased>(&cfg.mode)) {
        const CalculationPlan first = mb->first_step_plan ? *mb->first_step_plan
                                                          : classical_arnoldi_plan(8, primal.n_fields);
        std::vector<Vector> prev;
        for (int k = n_steps; k >= 1; --k) {
            wrap(k, [&] {
                ModeStepOptions opt;
                opt.t = primal.time.time(k);
                opt.dt = dt;
                opt.split = mb->split;
                opt.reuse_factorization = cfg.reuse_factorization_within_step;
                opt.source_g = cfg.source_g;
                opt.first_step_plan = &first;
                auto step = adjoint_step_mode_based(out.adjoint.states[k], primal.states[k], prev, mb->plan, problem,
                                                    opt);
                out.adjoint.states[k - 1] = std::move(step.qstar_next);
                out.rhs_calls += step.rhs_calls;
                out.dam_runs += step.dam_runs;
                out.fallbacks += step.fallbacks;
                // Input 3 is the previous total adjoint right side, shared by all parts.
                Vector total = step.rhs_values.front();
                for (std::size_t p = 1; p < step.rhs_values.size(); ++p) total += step.rhs_values[p];
                prev.assign(step.rhs_values.size(), total);
                out.rhs_values[k] = std::move(step.rhs_values);
            });
        }
    } else if (std::holds_alternative<Reference>(cfg.mode)) {
        ReferenceAdjoint ref(problem.rhs, problem.frechet);
        for (int k = n_steps; k >= 1; --k) {
            wrap(k, [&] {
                const Matrix& a = ref.operator_at(primal.states[k]);
                auto rhs = [&](double t, const Vector& y) -> Vector { return -(a.transpose() * y) - source(t); };
                out.rhs_values[k] = {a.transpose() * out.adjoint.states[k]};
                out.adjoint.states[k - 1] = rk4_step(rhs, out.adjoint.states[k], primal.time.time(k), -dt);
            });
        }
        out.rhs_calls = static_cast<long>(ref.builds()) * (primal.states.front().size() + 1);
    } else {
        if (!problem.analytic_rhs) throw ConfigError("analytic adjoint is not available for this model");
        for (int k = n_steps; k >= 1; --k) {
            wrap(k, [&] {
                const Vector& q0 = primal.states[k];
                auto rhs = [&](double t, const Vector& y) -> Vector { return problem.analytic_rhs(y, q0) - source(t); };
                out.rhs_values[k] = {-problem.analytic_rhs(out.adjoint.states[k], q0)};
                out.adjoint.states[k - 1] = rk4_step(rhs, out.adjoint.states[k], primal.time.time(k), -dt);
            });
        }
    }
    out.adjoint.validate();
    return out;
}

Vector terminal_gaussian(const GaussianIC& g, const Grid& grid, int n_fields) {
    if (!(g.width_cells > 0.0)) throw ConfigError("Gaussian width must be positive");
    if (g.field < 0 || g.field >= n_fields) throw ConfigError("Gaussian field index out of range");
    Vector q = Vector::Zero(n_fields * grid.n);
    const double w = g.width_cells * grid.dx();
    for (Eigen::Index i = 0; i < grid.n; ++i) {
        const double d = (grid.x(i) - g.center) / w;
        q[g.field * grid.n + i] = g.amplitude * std::exp(-d * d);
    }
    return q;
}

}  // namespace mba
