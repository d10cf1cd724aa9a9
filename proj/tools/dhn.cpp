// Command-line front end for the district-heating network toolkit.
//
// Subcommands:
//   scale     size a bench-scale twin of a full-scale network
//   simulate  run a scenario on a model and record the trajectory
//   nondim    project a recorded trajectory onto the dimensionless axes
//   compare   overlay two runs on the shared dimensionless clock
//   metrics   loss accounting, phases, efficiency, delay and statistics
//   validate  check a model (and optionally a scenario) for violations
//
// Exit codes: 0 success, 1 validation violations reported, 2 bad input or
// usage, 3 infeasible sizing request, 4 integrator failure, 5 mismatched
// trajectory spans.  Stdout carries the human summary; files carry the data.
// The default output directory is taken from DHN_OUT_DIR when set.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dhn/config.hpp"
#include "dhn/metrics.hpp"
#include "dhn/model.hpp"
#include "dhn/similitude.hpp"
#include "dhn/simulate.hpp"

namespace {

struct CommonOpts {
    std::string model_path;
    std::string scenario_path;
    std::string full_path;
    std::string constraints_path;
    std::string channel_map_path;
    std::string out_dir;
    std::vector<std::string> trajectories;
    std::vector<std::string> overrides;
    mutable std::vector<bool> override_used;  // parallel to overrides
    double dt = -1.0;       // <0: keep the scenario's value
    int subsegments = 0;    // 0: keep the scenario's value
    long long seed = -1;    // <0: keep the scenario's value
};

/// Load a config file, offering every --override to it.  A command may read
/// several files (model, scenario, constraints, channel map); each override
/// lands in whichever document has its section, and check_overrides() rejects
/// any that matched none of them.
dhn::ConfigDocument load_doc(const std::string& path, const CommonOpts& opts) {
    dhn::ConfigDocument doc = dhn::load_config_file(path);
    opts.override_used.resize(opts.overrides.size(), false);
    for (std::size_t i = 0; i < opts.overrides.size(); ++i)
        if (dhn::try_apply_override(doc, opts.overrides[i])) opts.override_used[i] = true;
    return doc;
}

/// Call once all of a command's config files are loaded.
void check_overrides(const CommonOpts& opts) {
    opts.override_used.resize(opts.overrides.size(), false);
    for (std::size_t i = 0; i < opts.overrides.size(); ++i)
        if (!opts.override_used[i])
            throw dhn::validation_error("override '" + opts.overrides[i] +
                                        "' matched no section in the loaded config files");
}

/// Model and scenario may share one file; allow foreign sections in that case.
bool shares_file(const CommonOpts& o) {
    return !o.scenario_path.empty() && o.scenario_path == o.model_path;
}

std::filesystem::path out_dir_of(const CommonOpts& o) {
    std::string dir = o.out_dir;
    if (dir.empty()) {
        const char* env = std::getenv("DHN_OUT_DIR");
        dir = env && *env ? env : ".";
    }
    std::filesystem::path p(dir);
    std::filesystem::create_directories(p);
    return p;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path);
    if (!os) throw dhn::validation_error("cannot write " + path.string());
    os << text;
}

/// The base quantities a nondimensional recording carries in its metadata.
dhn::NondimBase base_from_meta(const dhn::Trajectory& tr, const std::string& label) {
    const char* keys[] = {"base_rho", "base_mdot_I", "base_T_s", "base_D"};
    double vals[4];
    for (int i = 0; i < 4; ++i) {
        auto it = tr.meta.find(keys[i]);
        if (it == tr.meta.end())
            throw dhn::validation_error(label + " carries no " + keys[i] +
                                        " metadata; pass the matching model instead");
        vals[i] = std::stod(it->second);
    }
    return {vals[0], vals[1], vals[2], vals[3]};
}

int run_validate(const CommonOpts& opts) {
    const dhn::ConfigDocument mdoc = load_doc(opts.model_path, opts);
    const dhn::NetworkModel model = dhn::model_from_config(mdoc, shares_file(opts));
    dhn::ValidationReport report = dhn::validate_network(model);
    if (!opts.scenario_path.empty()) {
        const dhn::ConfigDocument sdoc =
            shares_file(opts) ? mdoc : load_doc(opts.scenario_path, opts);
        const dhn::ExperimentScenario sc = dhn::scenario_from_config(sdoc, shares_file(opts));
        const dhn::ValidationReport sr = dhn::validate_scenario(sc, model);
        report.violations.insert(report.violations.end(), sr.violations.begin(),
                                 sr.violations.end());
    }
    check_overrides(opts);
    if (!report.ok()) {
        std::cerr << report.to_string();
        std::cout << "INVALID (" << report.violations.size() << " violation"
                  << (report.violations.size() == 1 ? "" : "s") << ")\n";
        return 1;
    }
    std::cout << "OK\n";
    return 0;
}

int run_scale(const CommonOpts& opts) {
    const dhn::NetworkModel full =
        dhn::model_from_config(load_doc(opts.full_path, opts));
    const dhn::LabConstraints lc =
        dhn::lab_constraints_from_config(load_doc(opts.constraints_path, opts));
    check_overrides(opts);

    const dhn::ScalingSolution sol = dhn::solve_lab_scale(full, lc);
    const std::filesystem::path dir = out_dir_of(opts);
    const std::string report = dhn::scaling_report_text(sol);
    write_text(dir / "scaling_report.txt", report);
    write_text(dir / "scaling_report.csv", dhn::scaling_report_csv(sol));
    std::cout << report;

    if (!sol.feasible) {
        for (const std::string& c : sol.infeasibilities)
            std::cerr << "infeasible: " << c << "\n";
        return 3;
    }
    write_text(dir / "lab_model.cfg", dhn::write_model_config(sol.lab));
    std::cout << "wrote " << (dir / "lab_model.cfg").string() << "\n";
    return 0;
}

int run_simulate(const CommonOpts& opts) {
    const dhn::ConfigDocument mdoc = load_doc(opts.model_path, opts);
    const dhn::NetworkModel model = dhn::model_from_config(mdoc, shares_file(opts));
    const dhn::ConfigDocument sdoc =
        shares_file(opts) ? mdoc : load_doc(opts.scenario_path, opts);
    dhn::ExperimentScenario sc = dhn::scenario_from_config(sdoc, shares_file(opts));
    check_overrides(opts);
    if (opts.dt >= 0.0) sc.dt_s = opts.dt;
    if (opts.subsegments > 0) sc.subsegments = opts.subsegments;
    if (opts.seed >= 0) sc.seed = static_cast<unsigned>(opts.seed);

    dhn::Trajectory tr = dhn::simulate(model, sc);

    const std::filesystem::path dir = out_dir_of(opts);
    tr.save_csv((dir / "trajectory.csv").string());
    std::string sidecar;
    for (const auto& [k, v] : tr.meta) sidecar += k + " = " + v + "\n";
    write_text(dir / "trajectory_meta.txt", sidecar);

    std::cout << "simulated " << sc.duration_s << " s (" << tr.rows() << " samples), final "
              << "supply " << tr.at(tr.rows() - 1, "supply_C") << " degC, return "
              << tr.at(tr.rows() - 1, "return_C") << " degC\n"
              << "wrote " << (dir / "trajectory.csv").string() << "\n";
    return 0;
}

int run_nondim(const CommonOpts& opts) {
    const dhn::NetworkModel model =
        dhn::model_from_config(load_doc(opts.model_path, opts));
    check_overrides(opts);
    const dhn::Trajectory tr = dhn::Trajectory::load_csv(opts.trajectories.at(0));
    const dhn::Trajectory nd =
        dhn::nondimensionalize_trajectory(tr, dhn::base_of(model), model);

    const std::filesystem::path dir = out_dir_of(opts);
    const std::string stem = std::filesystem::path(opts.trajectories.at(0)).stem().string();
    const std::filesystem::path out = dir / (stem + "_star.csv");
    nd.save_csv(out.string());
    std::cout << "nondimensionalized " << nd.rows() << " samples, t* span "
              << nd.time().front() << " .. " << nd.time().back() << "\n"
              << "wrote " << out.string() << "\n";
    return 0;
}

int run_compare(const CommonOpts& opts) {
    const dhn::Trajectory full_tr = dhn::Trajectory::load_csv(opts.trajectories.at(0));
    const dhn::Trajectory lab_tr = dhn::Trajectory::load_csv(opts.trajectories.at(1));

    dhn::NetworkModel full_model, lab_model;
    dhn::CompareOptions copt;
    dhn::NondimBase full_base, lab_base;
    if (!opts.full_path.empty()) {
        full_model = dhn::model_from_config(load_doc(opts.full_path, opts));
        full_base = dhn::base_of(full_model);
        copt.full_model = &full_model;
    } else {
        full_base = base_from_meta(full_tr, "first trajectory");
    }
    if (!opts.model_path.empty()) {
        lab_model = dhn::model_from_config(load_doc(opts.model_path, opts));
        lab_base = dhn::base_of(lab_model);
        copt.lab_model = &lab_model;
    } else {
        lab_base = base_from_meta(lab_tr, "second trajectory");
    }
    check_overrides(opts);

    const dhn::ComparisonReport rep =
        dhn::compare_runs(full_tr, lab_tr, full_base, lab_base, copt);
    const std::filesystem::path dir = out_dir_of(opts);
    write_text(dir / "comparison.csv", dhn::comparison_report_csv(rep));
    rep.overlay.save_csv((dir / "overlay.csv").string());
    std::cout << dhn::comparison_report_text(rep) << "wrote "
              << (dir / "comparison.csv").string() << " and "
              << (dir / "overlay.csv").string() << "\n";
    return 0;
}

int run_metrics(const CommonOpts& opts) {
    const dhn::ConfigDocument mdoc = load_doc(opts.model_path, opts);
    const dhn::NetworkModel model = dhn::model_from_config(mdoc, shares_file(opts));

    dhn::Trajectory tr = dhn::Trajectory::load_csv(opts.trajectories.at(0));
    if (!opts.channel_map_path.empty()) {
        const dhn::ChannelMap cm = dhn::channel_map_from_config(
            load_doc(opts.channel_map_path, opts));
        tr = dhn::apply_channel_map(tr, cm);
    }

    dhn::ExperimentScenario sc;
    const dhn::ExperimentScenario* scp = nullptr;
    if (!opts.scenario_path.empty()) {
        const dhn::ConfigDocument sdoc =
            shares_file(opts) ? mdoc : load_doc(opts.scenario_path, opts);
        sc = dhn::scenario_from_config(sdoc, shares_file(opts));
        scp = &sc;
    }
    check_overrides(opts);

    const dhn::MetricsReport rep = dhn::compute_metrics(tr, model, dhn::base_of(model), scp);
    const std::filesystem::path dir = out_dir_of(opts);
    const std::string text = dhn::metrics_report_text(rep);
    write_text(dir / "metrics.txt", text);
    write_text(dir / "metrics.csv", dhn::metrics_report_csv(rep));
    std::cout << text << "wrote " << (dir / "metrics.csv").string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"district heating network simulator and scaling toolkit"};
    app.require_subcommand(1);

    CommonOpts opts;

    CLI::App* validate = app.add_subcommand("validate", "check a model file for violations");
    validate->add_option("--model", opts.model_path, "model config file")->required();
    validate->add_option("--scenario", opts.scenario_path, "scenario config file");

    CLI::App* scale =
        app.add_subcommand("scale", "size a bench-scale twin of a full-scale network");
    scale->add_option("--full", opts.full_path, "full-scale model config")->required();
    scale->add_option("--lab-constraints", opts.constraints_path, "bench [sizing] config")
        ->required();

    CLI::App* simulate = app.add_subcommand("simulate", "run a scenario and record it");
    simulate->add_option("--model", opts.model_path, "model config file")->required();
    simulate->add_option("--scenario", opts.scenario_path, "scenario config file")->required();
    simulate->add_option("--dt", opts.dt, "integrator step override [s] (0 = automatic)");
    simulate->add_option("--subsegments", opts.subsegments,
                         "pipe subdivision override (finite volumes per segment)");

    CLI::App* nondim =
        app.add_subcommand("nondim", "project a recorded run onto dimensionless axes");
    nondim->add_option("trajectory", opts.trajectories, "trajectory CSV")
        ->required()
        ->expected(1);
    nondim->add_option("--model", opts.model_path, "model the run was recorded with")
        ->required();

    CLI::App* compare =
        app.add_subcommand("compare", "overlay two runs on the shared dimensionless clock");
    compare->add_option("trajectories", opts.trajectories, "two trajectory CSVs")
        ->required()
        ->expected(2);
    compare->add_option("--full", opts.full_path,
                        "model of the first run (enables the group-residual table)");
    compare->add_option("--model", opts.model_path, "model of the second run");

    CLI::App* metrics = app.add_subcommand("metrics", "loss, phase and delay analysis of a run");
    metrics->add_option("trajectory", opts.trajectories, "trajectory CSV")
        ->required()
        ->expected(1);
    metrics->add_option("--model", opts.model_path, "model the run was recorded with")
        ->required();
    metrics->add_option("--scenario", opts.scenario_path,
                        "scenario (enables exact window-based phase attribution)");
    metrics->add_option("--channel-map", opts.channel_map_path,
                        "[channel_map] config renaming raw acquisition columns");

    for (CLI::App* sub : {validate, scale, simulate, nondim, compare, metrics}) {
        sub->add_option("--override", opts.overrides,
                        "config override 'section.key=value' (repeatable)");
        sub->add_option("--out-dir", opts.out_dir,
                        "output directory (default: $DHN_OUT_DIR or '.')");
        sub->add_option("--seed", opts.seed,
                        "seed recorded with the run (all pipelines are deterministic)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (validate->parsed()) return run_validate(opts);
        if (scale->parsed()) return run_scale(opts);
        if (simulate->parsed()) return run_simulate(opts);
        if (nondim->parsed()) return run_nondim(opts);
        if (compare->parsed()) return run_compare(opts);
        if (metrics->parsed()) return run_metrics(opts);
    } catch (const dhn::span_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 5;
    } catch (const dhn::validation_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const dhn::numeric_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
