#include "mba/scenarios.hpp"

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace mba {

namespace {

constexpr double kZeroFieldRatio = 1e-8;

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::stringstream in(s);
    while (std::getline(in, item, ',')) {
        item.erase(0, item.find_first_not_of(" \t"));
        item.erase(item.find_last_not_of(" \t") + 1);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

MaskPolicy parse_policy(const std::string& s) {
    if (s == "identity") return MaskPolicy::IdentityOnly;
    if (s == "single") return MaskPolicy::SingleField;
    if (s == "full") return MaskPolicy::Full;
    throw ConfigError("unknown mask policy '" + s + "' (identity | single | full)");
}

ModelKind parse_model(const std::string& s) {
    if (s == "burgers") return ModelKind::Burgers;
    if (s == "euler") return ModelKind::Euler;
    throw ConfigError("unknown model '" + s + "' (burgers | euler)");
}

double sound_speed(const ScenarioConfig& c) { return std::sqrt(c.gamma * c.p0 / c.rho0); }

double base_velocity(const ScenarioConfig& c) { return c.u0_mach != 0.0 ? c.u0_mach * sound_speed(c) : c.u0; }

}  // namespace

void ScenarioConfig::validate() const {
    if (n < 5) throw ConfigError("grid.n must be >= 5");
    if (!(length > 0.0)) throw ConfigError("grid.length must be positive");
    if (order != 2 && order != 4) throw ConfigError("grid.order must be 2 or 4");
    if (!(cfl > 0.0)) throw ConfigError("time.cfl must be positive");
    if (n_steps < 1) throw ConfigError("time.n_steps must be >= 1");
    if (resolution_scale < 1) throw ConfigError("resolution scale must be >= 1");
    if (mu < 0.0) throw ConfigError("model.mu must be nonnegative");
    if (!(gamma > 1.0)) throw ConfigError("model.gamma must exceed 1");
    if (model == ModelKind::Euler && (!(rho0 > 0.0) || !(p0 > 0.0)))
        throw ConfigError("model.rho0 and model.p0 must be positive");
    if (model == ModelKind::Euler && !periodic && !(sponge_fraction > 0.0 && sponge_fraction < 0.5))
        throw ConfigError("model.sponge_fraction must lie in (0, 0.5)");
    if (source && periodic) throw ConfigError("a pressure source needs open boundaries");
    if (!(terminal_width_cells > 0.0)) throw ConfigError("terminal.width_cells must be positive");
    const int n_fields = model == ModelKind::Euler ? kEulerFields : 1;
    if (terminal_field < 0 || terminal_field >= n_fields) throw ConfigError("terminal.field out of range");
    if (modes.empty()) throw ConfigError("adjoint.modes must name at least one mode");
    for (const auto& m : modes)
        if (m != "mode_based" && m != "reference" && m != "analytic")
            throw ConfigError("unknown adjoint mode '" + m + "' (mode_based | reference | analytic)");
    if (split && model != ModelKind::Burgers) throw ConfigError("split operators are only defined for Burgers");
    if (std::find(modes.begin(), modes.end(), "analytic") != modes.end() && model != ModelKind::Burgers)
        throw ConfigError("the analytic adjoint is only available for Burgers");
    if (snapshot_stride < 1) throw ConfigError("training.stride must be >= 1");
    if (!(criterion > 0.0)) throw ConfigError("training.criterion must be positive");
    if (max_lines < 1) throw ConfigError("training.max_lines must be >= 1");
    if (!(alpha > 0.0)) throw ConfigError("objective.alpha must be positive");
    if (n_iters < 0) throw ConfigError("objective.n_iters must be nonnegative");
}

std::vector<std::string> builtin_case_ids() { return {"B1", "B2", "B3", "E1", "E2", "E3", "E4", "O1"}; }

ScenarioConfig builtin_case(const std::string& id) {
    ScenarioConfig c;
    c.case_id = id;
    if (id == "B1" || id == "B2" || id == "B3") {
        c.model = ModelKind::Burgers;
        c.n = 128;
        c.length = 2.0 * std::numbers::pi;
        c.order = 4;
        c.cfl = 0.5;
        c.n_steps = 256;
        c.u_mean = 0.5;
        c.u_amplitude = id == "B1" ? 0.0 : 1.0 / 20.0;
        c.mu = id == "B3" ? 7.5e-3 : 0.0;
        c.split = id == "B3";
        c.terminal_amplitude = 0.5;
        c.terminal_width_cells = 15.0;
        c.modes = {"mode_based", "reference", "analytic"};
        c.offer_previous_rhs = true;
        return c;
    }
    if (id == "E1" || id == "E2" || id == "E3" || id == "E4" || id == "O1") {
        c.model = ModelKind::Euler;
        c.n = 128;
        c.length = 2.0 * std::numbers::pi;
        c.order = 4;
        c.cfl = 0.75;
        c.n_steps = 171;
        c.rho0 = 1.0;
        c.p0 = (id == "E2" || id == "E4") ? 1e5 : 1.5;
        c.u0_mach = id == "E3" ? 1.0 / 3.0 : 0.0;
        c.terminal_amplitude = 5.0;
        c.terminal_width_cells = 10.0;
        c.terminal_field = 2;
        c.offer_previous_rhs = false;
        if (id == "E4" || id == "O1") {
            c.periodic = false;
            c.order = 2;
        }
        if (id == "O1") {
            c.length = 4.0 * std::numbers::pi;
            c.n = 256;
            c.n_steps = 384;
            c.source = true;
            c.terminal_amplitude = 0.0;
            c.modes = {"reference", "mode_based"};
        }
        return c;
    }
    throw ConfigError("unknown case '" + id + "'; builtin cases are B1 B2 B3 E1 E2 E3 E4 O1");
}

void apply_config_text(ScenarioConfig& cfg, const std::string& ini_text) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    std::istringstream in(ini_text);
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (auto id = tree.get_optional<std::string>("case.id")) {
        const bool builtin = *id != "custom";
        if (builtin) cfg = builtin_case(*id);
        cfg.case_id = *id;
    }
    auto take = [&tree](const char* key, auto& field) {
        using T = std::decay_t<decltype(field)>;
        try {
            // get_optional<T> silently drops unparsable values; get<T> reports them.
            if (tree.get_optional<std::string>(key)) field = tree.get<T>(key);
        } catch (const pt::ptree_bad_data&) {
            throw ConfigError(std::string("config: bad value for ") + key);
        }
    };
    if (auto m = tree.get_optional<std::string>("model.kind")) cfg.model = parse_model(*m);
    take("grid.n", cfg.n);
    take("grid.length", cfg.length);
    take("grid.periodic", cfg.periodic);
    take("grid.order", cfg.order);
    take("grid.resolution_scale", cfg.resolution_scale);
    take("time.cfl", cfg.cfl);
    take("time.n_steps", cfg.n_steps);
    take("model.mu", cfg.mu);
    take("model.u_mean", cfg.u_mean);
    take("model.u_amplitude", cfg.u_amplitude);
    take("model.gamma", cfg.gamma);
    take("model.rho0", cfg.rho0);
    take("model.u0", cfg.u0);
    take("model.u0_mach", cfg.u0_mach);
    take("model.p0", cfg.p0);
    take("model.sponge_strength", cfg.sponge_strength);
    take("model.sponge_fraction", cfg.sponge_fraction);
    take("model.source", cfg.source);
    take("model.source_frequency", cfg.source_frequency);
    take("model.source_location_fraction", cfg.source_location_fraction);
    take("model.source_amplitude", cfg.source_amplitude);
    take("model.source_width_cells", cfg.source_width_cells);
    take("terminal.amplitude", cfg.terminal_amplitude);
    take("terminal.width_cells", cfg.terminal_width_cells);
    take("terminal.center_fraction", cfg.terminal_center_fraction);
    take("terminal.field", cfg.terminal_field);
    if (auto m = tree.get_optional<std::string>("adjoint.modes")) cfg.modes = split_list(*m);
    take("adjoint.plan", cfg.plan_source);
    take("adjoint.builtin_plan", cfg.builtin_plan);
    take("adjoint.split", cfg.split);
    take("adjoint.reuse_factorization", cfg.reuse_factorization);
    take("adjoint.frechet_epsilon", cfg.frechet_epsilon);
    take("adjoint.frechet_central", cfg.frechet_central);
    take("training.stride", cfg.snapshot_stride);
    take("training.previous_rhs", cfg.offer_previous_rhs);
    take("training.criterion", cfg.criterion);
    take("training.max_lines", cfg.max_lines);
    if (auto m = tree.get_optional<std::string>("training.mask_policy")) cfg.mask_policy = parse_policy(*m);
    take("objective.p_target", cfg.p_target);
    take("objective.alpha", cfg.alpha);
    take("objective.sigma_edge_fraction", cfg.sigma_edge_fraction);
    take("objective.sigma_smooth_cells", cfg.sigma_smooth_cells);
    take("objective.theta_center_fraction", cfg.theta_center_fraction);
    take("objective.theta_width_cells", cfg.theta_width_cells);
    take("objective.iterations", cfg.n_iters);
    take("output.dir", cfg.output_dir);
}

ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    std::stringstream text;
    text << in.rdbuf();
    ScenarioConfig cfg;
    apply_config_text(cfg, text.str());
    return cfg;
}

CaseSetup build_case(const ScenarioConfig& cfg) {
    cfg.validate();
    CaseSetup s;
    const Eigen::Index n = cfg.n * cfg.resolution_scale;
    const int n_steps = cfg.n_steps * cfg.resolution_scale;
    s.grid = Grid(n, cfg.length, cfg.periodic);
    s.problem.frechet = {cfg.frechet_epsilon, cfg.frechet_central};
    const double center = cfg.terminal_center_fraction * cfg.length;

    if (cfg.model == ModelKind::Burgers) {
        if (!cfg.periodic) throw ConfigError("Burgers cases are periodic");
        BurgersParams bp{cfg.mu, s.grid, cfg.order};
        s.burgers = bp;
        s.initial.resize(n);
        for (Eigen::Index i = 0; i < n; ++i)
            s.initial[i] = cfg.u_mean + cfg.u_amplitude * std::sin(2.0 * std::numbers::pi * s.grid.x(i) / cfg.length);
        s.wave_speed = s.initial.cwiseAbs().maxCoeff();
        s.primal_rhs = [bp](const Vector& u) { return burgers_rhs(u, bp); };
        s.problem.rhs = s.primal_rhs;
        s.problem.parts = {[bp](const Vector& u) { return burgers_transport_rhs(u, bp); },
                           [bp](const Vector& u) { return burgers_friction_rhs(u, bp); }};
        s.problem.n_fields = 1;
        s.problem.field_names = {"u"};
        s.problem.analytic_rhs = [bp](const Vector& us, const Vector& u0) {
            return burgers_adjoint_analytic_rhs(us, u0, bp);
        };
        s.terminal = terminal_gaussian({center, cfg.terminal_width_cells, cfg.terminal_amplitude, 0}, s.grid, 1);
    } else {
        EulerParams ep;
        ep.gamma = cfg.gamma;
        ep.grid = s.grid;
        ep.order = cfg.order;
        const double u0 = base_velocity(cfg);
        const double c = sound_speed(cfg);
        s.initial = uniform_euler_state(s.grid, cfg.rho0, u0, cfg.p0);
        s.wave_speed = std::abs(u0) + c;
        if (cfg.periodic) {
            ep.boundary = EulerBoundary::Periodic;
        } else {
            ep.boundary = EulerBoundary::OpenSponge;
            const double sigma_max = cfg.sponge_strength * s.wave_speed / (cfg.sponge_fraction * cfg.length);
            ep.sponge = SpongeProfile::quadratic(s.grid, s.initial, sigma_max, cfg.sponge_fraction);
        }
        if (cfg.source)
            ep.forcing = PressureSource{cfg.source_frequency, cfg.source_location_fraction * cfg.length,
                                        cfg.source_amplitude, cfg.source_width_cells};
        s.euler = ep;
        if (cfg.periodic)
            s.primal_rhs = [ep](const Vector& q) { return euler_rhs(q, ep); };
        else
            s.primal_rhs = [ep](const Vector& q) { return euler_open_rhs(q, ep); };
        if (ep.forcing) {
            s.primal_forcing = [ep, n](double t) {
                Vector f = Vector::Zero(kEulerFields * n);
                f.segment(2 * n, n) = pressure_source_eval(*ep.forcing, ep.grid, t);
                return f;
            };
        }
        s.problem.rhs = s.primal_rhs;
        s.problem.n_fields = kEulerFields;
        s.problem.field_names = {"rho", "u", "p"};
        s.terminal = terminal_gaussian({center, cfg.terminal_width_cells, cfg.terminal_amplitude, cfg.terminal_field},
                                       s.grid, kEulerFields);
    }
    s.time = TimeGrid{n_steps, cfl_dt(s.wave_speed, s.grid.dx(), cfg.cfl), 0.0};
    return s;
}

Comparison compare_trajectories(const Trajectory& a, const Trajectory& b, std::string label) {
    if (a.n_fields != b.n_fields || a.time.n_steps != b.time.n_steps || a.states.size() != b.states.size() ||
        a.states.front().size() != b.states.front().size())
        throw ConfigError("trajectory headers differ (" + label + ")");
    if (std::abs(a.time.dt - b.time.dt) > 1e-12 * std::abs(b.time.dt) || a.time.t0 != b.time.t0)
        throw ConfigError("trajectory time grids differ (" + label + ")");
    Comparison c;
    c.label = std::move(label);
    const int nf = a.n_fields;
    const Eigen::Index n = a.n_grid();
    std::vector<double> dmax(nf, 0.0), rmax(nf, 0.0), d2(nf, 0.0), r2(nf, 0.0);
    for (std::size_t k = 0; k < a.states.size(); ++k) {
        const Vector d = a.states[k] - b.states[k];
        c.step_max_abs.push_back(d.cwiseAbs().maxCoeff());
        for (int f = 0; f < nf; ++f) {
            dmax[f] = std::max(dmax[f], d.segment(f * n, n).cwiseAbs().maxCoeff());
            rmax[f] = std::max(rmax[f], b.states[k].segment(f * n, n).cwiseAbs().maxCoeff());
            d2[f] += d.segment(f * n, n).squaredNorm();
            r2[f] += b.states[k].segment(f * n, n).squaredNorm();
        }
    }
    const double gmax = *std::max_element(rmax.begin(), rmax.end());
    const double gd = *std::max_element(dmax.begin(), dmax.end());
    double sd2 = 0.0, sr2 = 0.0;
    for (int f = 0; f < nf; ++f) {
        sd2 += d2[f];
        sr2 += r2[f];
    }
    auto ratio = [](double num, double den) { return den > 0.0 ? num / den : num; };
    c.max_relative = ratio(gd, gmax);
    c.l2_relative = ratio(std::sqrt(sd2), std::sqrt(sr2));
    for (int f = 0; f < nf; ++f) {
        FieldError fe;
        fe.name = f < static_cast<int>(b.field_names.size()) ? b.field_names[f] : "q" + std::to_string(f + 1);
        fe.max_abs = dmax[f];
        fe.ref_max = rmax[f];
        const bool zero_field = rmax[f] <= kZeroFieldRatio * gmax;
        fe.max_relative = ratio(dmax[f], zero_field ? gmax : rmax[f]);
        fe.l2_relative = ratio(std::sqrt(d2[f]), zero_field ? std::sqrt(sr2) : std::sqrt(r2[f]));
        c.scaled_max_relative = std::max(c.scaled_max_relative, fe.max_relative);
        c.fields.push_back(fe);
    }
    return c;
}

const Comparison* ErrorReport::find(const std::string& label) const {
    for (const auto& c : comparisons)
        if (c.label == label) return &c;
    return nullptr;
}

void write_report_csv(const ErrorReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << std::setprecision(8) << "case,comparison,field,max_abs,ref_max,max_relative,l2_relative\n";
    for (const auto& c : report.comparisons) {
        out << report.case_id << ',' << c.label << ",all,," << "," << c.max_relative << ',' << c.l2_relative << '\n';
        out << report.case_id << ',' << c.label << ",scaled,,," << c.scaled_max_relative << ",\n";
        for (const auto& f : c.fields)
            out << report.case_id << ',' << c.label << ',' << f.name << ',' << f.max_abs << ',' << f.ref_max << ','
                << f.max_relative << ',' << f.l2_relative << '\n';
    }
}

void write_step_errors_csv(const ErrorReport& report, const TimeGrid& time, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << std::setprecision(8) << "step,t";
    for (const auto& c : report.comparisons) out << ',' << c.label;
    out << '\n';
    for (int k = 0; k <= time.n_steps; ++k) {
        out << k << ',' << time.time(k);
        for (const auto& c : report.comparisons) out << ',' << c.step_max_abs[k];
        out << '\n';
    }
}

NoiseProblem build_noise_problem(const ScenarioConfig& cfg) {
    const CaseSetup s = build_case(cfg);
    if (!s.euler || cfg.periodic) throw ConfigError("noise optimization needs an open-boundary Euler case");
    NoiseProblem np;
    np.params = *s.euler;
    np.initial = s.initial;
    np.time = s.time;
    np.frechet = s.problem.frechet;
    np.reuse_factorization = cfg.reuse_factorization;
    np.objective = make_noise_objective(s.grid, cfg.p_target, cfg.alpha, cfg.sigma_edge_fraction * cfg.length,
                                        cfg.sigma_smooth_cells, cfg.theta_center_fraction * cfg.length,
                                        cfg.theta_width_cells);
    return np;
}

AdjointMode adjoint_mode_for(const std::string& name, const ScenarioConfig& cfg, const CalculationPlan* plan) {
    if (name == "reference") return Reference{};
    if (name == "analytic") return AnalyticBurgers{};
    if (name == "mode_based") {
        if (plan == nullptr) throw ConfigError("mode-based adjoint needs a calculation plan");
        return ModeBased{*plan, std::nullopt, cfg.split};
    }
    throw ConfigError("unknown adjoint mode '" + name + "'");
}

CaseTraining train_case(const ScenarioConfig& cfg) {
    const CaseSetup s = build_case(cfg);
    const Trajectory primal =
        run_primal(s.primal_rhs, s.initial, s.time, s.problem.n_fields, s.primal_forcing, s.problem.field_names);
    AdjointRunConfig rc;
    rc.mode = Reference{};
    rc.terminal_condition = s.terminal;
    if (cfg.source) rc.source_g = adjoint_source_g(primal, build_noise_problem(cfg).objective);
    const auto ref = run_adjoint(primal, rc, s.problem);
    CaseTraining out;
    out.snapshots = build_snapshots(primal, ref.adjoint, s.problem, cfg.snapshot_stride, cfg.offer_previous_rhs,
                                    cfg.split);
    TrainerConfig tc;
    tc.quality_criterion = cfg.criterion;
    tc.max_lines = cfg.max_lines;
    tc.candidate_mask_policy = cfg.mask_policy;
    out.result = train_plan(out.snapshots, s.problem, tc);
    return out;
}

CalculationPlan resolve_plan(const ScenarioConfig& cfg) {
    if (cfg.plan_source == "builtin") return published_plan(cfg.builtin_plan.empty() ? cfg.case_id : cfg.builtin_plan);
    if (cfg.plan_source == "train") return train_case(cfg).result.plan;
    return read_plan_file(cfg.plan_source);
}

CaseRun run_case(const ScenarioConfig& cfg) {
    CaseRun run;
    run.cfg = cfg;
    run.setup = build_case(cfg);
    const CaseSetup& s = run.setup;
    run.primal =
        run_primal(s.primal_rhs, s.initial, s.time, s.problem.n_fields, s.primal_forcing, s.problem.field_names);
    TimeSource g;
    if (cfg.source) g = adjoint_source_g(run.primal, build_noise_problem(cfg).objective);

    const bool wants_plan = std::find(cfg.modes.begin(), cfg.modes.end(), "mode_based") != cfg.modes.end();
    if (wants_plan) run.plan = resolve_plan(cfg);
    for (const auto& name : cfg.modes) {
        AdjointRunConfig rc;
        rc.mode = adjoint_mode_for(name, cfg, run.plan ? &*run.plan : nullptr);
        rc.terminal_condition = s.terminal;
        rc.source_g = g;
        rc.reuse_factorization_within_step = cfg.reuse_factorization;
        run.adjoints.emplace(name, run_adjoint(run.primal, rc, s.problem));
    }

    run.report.case_id = cfg.case_id;
    auto add = [&](const std::string& a, const std::string& b) {
        if (run.adjoints.count(a) && run.adjoints.count(b))
            run.report.comparisons.push_back(
                compare_trajectories(run.adjoints.at(a).adjoint, run.adjoints.at(b).adjoint, a + " vs " + b));
    };
    add("mode_based", "reference");
    add("mode_based", "analytic");
    add("reference", "analytic");

    if (!cfg.output_dir.empty()) {
        namespace fs = std::filesystem;
        fs::create_directories(cfg.output_dir);
        const fs::path dir(cfg.output_dir);
        write_trajectory(run.primal, (dir / "primal.csv").string());
        write_trajectory_long_csv(run.primal, s.grid, (dir / "primal_long.csv").string());
        for (const auto& [name, res] : run.adjoints) {
            write_trajectory(res.adjoint, (dir / ("adjoint_" + name + ".csv")).string());
            write_trajectory_long_csv(res.adjoint, s.grid, (dir / ("adjoint_" + name + "_long.csv")).string());
        }
        if (run.plan) write_plan_file(*run.plan, (dir / "plan.txt").string());
        write_report_csv(run.report, (dir / "report.csv").string());
        if (!run.report.comparisons.empty())
            write_step_errors_csv(run.report, s.time, (dir / "step_errors.csv").string());
    }
    return run;
}

namespace {

Eigen::Index sponge_edge_index(const Grid& grid, double fraction) {
    Eigen::Index i = 0;
    while (i < grid.n && grid.x(i) < fraction * grid.length) ++i;
    return i;
}

}  // namespace

double boundary_reflection_ratio(const Trajectory& adjoint, const Grid& grid, double sponge_fraction) {
    const Eigen::Index n = grid.n;
    const Eigen::Index lo = sponge_edge_index(grid, sponge_fraction);
    const Eigen::Index hi = n - 1 - lo;
    double incident = 0.0;
    for (const auto& q : adjoint.states)
        incident = std::max({incident, std::abs(q[2 * n + lo]), std::abs(q[2 * n + hi])});
    if (incident == 0.0) throw ContractError("adjoint pressure never reaches the sponge edge");
    const Vector& first = adjoint.states.front();
    const double residual = first.segment(2 * n + lo, hi - lo + 1).cwiseAbs().maxCoeff();
    return residual / incident;
}

int first_boundary_contact_step(const Trajectory& adjoint, const Grid& grid, double sponge_fraction,
                                double threshold) {
    const Eigen::Index n = grid.n;
    const Eigen::Index lo = sponge_edge_index(grid, sponge_fraction);
    const Eigen::Index hi = n - 1 - lo;
    const int last = adjoint.time.n_steps;
    const double peak = adjoint.states[last].segment(2 * n, n).cwiseAbs().maxCoeff();
    for (int k = last; k >= 0; --k) {
        const auto& q = adjoint.states[k];
        if (std::max(std::abs(q[2 * n + lo]), std::abs(q[2 * n + hi])) > threshold * peak) return k;
    }
    return 0;
}

Trajectory slice_steps(const Trajectory& traj, int k_begin, int k_end) {
    if (k_begin < 0 || k_end > traj.time.n_steps || k_begin > k_end) throw ContractError("step range out of bounds");
    Trajectory out;
    out.n_fields = traj.n_fields;
    out.field_names = traj.field_names;
    out.time = TimeGrid{k_end - k_begin, traj.time.dt, traj.time.time(k_begin)};
    out.states.assign(traj.states.begin() + k_begin, traj.states.begin() + k_end + 1);
    return out;
}

}  // namespace mba
