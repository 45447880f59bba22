#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "mba/scenarios.hpp"

namespace {

struct CommonOptions {
    std::string case_id;
    std::string config;
    std::string output;
    int resolution_scale = 0;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("--case", o.case_id, "builtin case id (B1 B2 B3 E1 E2 E3 E4 O1)");
    cmd->add_option("--config", o.config, "INI scenario file");
    cmd->add_option("--output", o.output, "output directory (overrides MBA_OUTPUT_DIR)");
    cmd->add_option("--resolution-scale", o.resolution_scale, "multiply grid points and steps")->check(CLI::PositiveNumber);
}

mba::ScenarioConfig resolve_config(const CommonOptions& o) {
    if (o.config.empty() && o.case_id.empty()) throw mba::ConfigError("give --case or --config");
    mba::ScenarioConfig cfg = o.case_id.empty() ? mba::ScenarioConfig{} : mba::builtin_case(o.case_id);
    if (!o.config.empty()) {
        std::ifstream in(o.config);
        if (!in) throw mba::ConfigError("cannot open config " + o.config);
        std::stringstream text;
        text << in.rdbuf();
        mba::apply_config_text(cfg, text.str());
        if (!o.case_id.empty()) cfg.case_id = o.case_id;
    }
    if (const char* env = std::getenv("MBA_OUTPUT_DIR"); env != nullptr && *env != '\0') cfg.output_dir = env;
    if (!o.output.empty()) cfg.output_dir = o.output;
    if (o.resolution_scale > 0) cfg.resolution_scale = o.resolution_scale;
    return cfg;
}

void print_report(const mba::ErrorReport& r) {
    std::cout << std::setprecision(4) << std::scientific;
    for (const auto& c : r.comparisons) {
        std::cout << r.case_id << "  " << c.label << "  max_rel=" << c.max_relative << "  l2_rel=" << c.l2_relative
                  << "  scaled_max_rel=" << c.scaled_max_relative << '\n';
        for (const auto& f : c.fields)
            std::cout << "    " << f.name << "  max_abs=" << f.max_abs << "  ref_max=" << f.ref_max
                      << "  max_rel=" << f.max_relative << '\n';
    }
}

mba::MaskPolicy policy_from(const std::string& s) {
    if (s == "identity") return mba::MaskPolicy::IdentityOnly;
    if (s == "single") return mba::MaskPolicy::SingleField;
    if (s == "full") return mba::MaskPolicy::Full;
    throw mba::ConfigError("unknown mask policy '" + s + "'");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mode-based adjoint solver: scenario runs, plan training, comparisons, noise optimization"};
    app.require_subcommand(1);

    CommonOptions run_opt;
    std::string run_plan;
    std::vector<std::string> run_modes;
    auto* run = app.add_subcommand("run", "run a case and compare adjoint modes");
    add_common(run, run_opt);
    run->add_option("--plan", run_plan, "builtin | train | path to a plan file");
    run->add_option("--mode", run_modes, "mode_based, reference, analytic (repeatable)");

    CommonOptions train_opt;
    double criterion = 0.0;
    int max_lines = 0, stride = 0;
    std::string policy;
    std::string previous_rhs;
    auto* train = app.add_subcommand("train", "greedy calculation-plan training");
    add_common(train, train_opt);
    train->add_option("--criterion", criterion, "quality criterion");
    train->add_option("--max-lines", max_lines, "plan length limit");
    train->add_option("--stride", stride, "snapshot stride");
    train->add_option("--mask-policy", policy, "identity | single | full");
    train->add_option("--previous-rhs", previous_rhs, "offer the previous step's RHS as input 3 (on|off)");

    std::string cmp_a, cmp_b;
    auto* compare = app.add_subcommand("compare", "field-wise difference of two trajectory dumps");
    compare->add_option("candidate", cmp_a, "trajectory dump")->required()->check(CLI::ExistingFile);
    compare->add_option("reference", cmp_b, "reference trajectory dump")->required()->check(CLI::ExistingFile);

    CommonOptions opt_opt;
    std::string opt_mode = "reference";
    int iterations = -1;
    auto* optimize = app.add_subcommand("optimize", "adjoint-driven noise cancellation");
    add_common(optimize, opt_opt);
    optimize->add_option("--mode", opt_mode, "reference | mode_based");
    optimize->add_option("--iterations", iterations, "gradient steps");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*run) {
            auto cfg = resolve_config(run_opt);
            if (!run_plan.empty()) cfg.plan_source = run_plan;
            if (!run_modes.empty()) cfg.modes = run_modes;
            const auto result = mba::run_case(cfg);
            if (result.plan) std::cout << mba::format_plan(*result.plan);
            print_report(result.report);
        } else if (*train) {
            auto cfg = resolve_config(train_opt);
            if (criterion > 0.0) cfg.criterion = criterion;
            if (max_lines > 0) cfg.max_lines = max_lines;
            if (stride > 0) cfg.snapshot_stride = stride;
            if (!policy.empty()) cfg.mask_policy = policy_from(policy);
            if (previous_rhs == "on") cfg.offer_previous_rhs = true;
            else if (previous_rhs == "off") cfg.offer_previous_rhs = false;
            else if (!previous_rhs.empty()) throw mba::ConfigError("--previous-rhs takes on or off");
            const auto t = mba::train_case(cfg);
            std::cout << mba::format_plan(t.result.plan);
            std::cout << std::setprecision(4) << std::scientific;
            for (std::size_t i = 0; i < t.result.error_history.size(); ++i)
                std::cout << "lines=" << i + 1 << "  error=" << t.result.error_history[i] << '\n';
            std::cout << (t.result.converged ? "criterion met\n" : "criterion not met\n");
            if (!cfg.output_dir.empty()) {
                std::filesystem::create_directories(cfg.output_dir);
                const std::filesystem::path dir(cfg.output_dir);
                mba::write_plan_file(t.result.plan, (dir / ("plan_" + cfg.case_id + ".txt")).string());
                std::ofstream h(dir / ("training_" + cfg.case_id + ".csv"));
                h << std::setprecision(10) << "lines,error\n";
                for (std::size_t i = 0; i < t.result.error_history.size(); ++i)
                    h << i + 1 << ',' << t.result.error_history[i] << '\n';
            }
            if (!t.result.converged) return 2;
        } else if (*compare) {
            mba::ErrorReport r;
            r.case_id = "compare";
            r.comparisons.push_back(mba::compare_trajectories(mba::read_trajectory(cmp_a), mba::read_trajectory(cmp_b),
                                                              cmp_a + " vs " + cmp_b));
            print_report(r);
        } else if (*optimize) {
            auto cfg = resolve_config(opt_opt.case_id.empty() && opt_opt.config.empty()
                                          ? CommonOptions{"O1", "", opt_opt.output, opt_opt.resolution_scale}
                                          : opt_opt);
            if (iterations >= 0) cfg.n_iters = iterations;
            const auto np = mba::build_noise_problem(cfg);
            std::optional<mba::CalculationPlan> plan;
            if (opt_mode == "mode_based") plan = mba::resolve_plan(cfg);
            const auto rep = mba::optimize_noise(np, mba::adjoint_mode_for(opt_mode, cfg, plan ? &*plan : nullptr),
                                                 cfg.n_iters);
            std::cout << std::setprecision(6) << std::scientific;
            for (std::size_t i = 0; i < rep.objective.size(); ++i)
                std::cout << "iteration " << i << "  J=" << rep.objective[i] << "  J/J0=" << rep.normalized[i] << '\n';
            if (rep.increased_twice) std::cout << "warning: objective increased on two consecutive iterations\n";
            if (!cfg.output_dir.empty()) {
                std::filesystem::create_directories(cfg.output_dir);
                const std::filesystem::path dir(cfg.output_dir);
                mba::write_optimization_csv(rep, (dir / ("optimization_" + opt_mode + ".csv")).string());
                mba::write_trajectory(rep.final_primal, (dir / ("final_primal_" + opt_mode + ".csv")).string());
            }
        }
    } catch (const mba::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 2;
    } catch (const mba::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const mba::ContractError& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
