#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <numeric>

#include "asyncfv/config.hpp"
#include "asyncfv/diagnostics.hpp"
#include "asyncfv/discretization.hpp"
#include "asyncfv/harness.hpp"
#include "asyncfv/io.hpp"

namespace fs = std::filesystem;
using namespace asyncfv;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

struct Common {
    std::string config;
    std::string out;
    std::string experiment;
    std::string scale = "desk";
    unsigned jobs = 1;
    std::int64_t seed = -1;
    bool trace = false;
    bool check = false;
};

std::string cache_dir() {
    if (const char* env = std::getenv("ASYNCFV_CACHE"); env && *env) {
        return env;
    }
    return (fs::temp_directory_path() / "asyncfv-cache").string();
}

/// Config from --config, or a named experiment when no file is given.
RunConfig resolve_config(const Common& c) {
    RunConfig rc;
    if (!c.config.empty()) {
        rc = load_config(c.config);
    } else if (!c.experiment.empty()) {
        std::string text = "[experiment]\nname = " + c.experiment + "\nscale = " + c.scale + "\n";
        rc = parse_config(text);
    } else {
        throw ConfigError("--config", 0, "a config file (or, for sweep and export-grid, --experiment) is required");
    }
    Hasher h;
    h.value(rc.hash);
    if (c.seed >= 0) {
        rc.experiment.seed = static_cast<std::uint64_t>(c.seed);
        h.text("seed").value(rc.experiment.seed);
    }
    if (c.trace) {
        rc.trace = true;
    }
    if (!c.out.empty()) {
        rc.out_dir = c.out;
    }
    rc.hash = h.digest();
    return rc;
}

nlohmann::json metadata_base(const RunConfig& rc, const std::string& command) {
    nlohmann::json meta;
    meta["tool"] = "asyncfv";
    meta["version"] = std::string(kToolVersion);
    meta["command"] = command;
    meta["config_hash"] = hex64(rc.hash);
    meta["config"] = rc.echo;
    meta["experiment"] = rc.experiment.name;
    meta["seed"] = rc.experiment.seed;
    return meta;
}

void write_metadata(const nlohmann::json& meta, const fs::path& path) {
    auto out = open_output(path.string());
    out << meta.dump(2) << '\n';
}

int cmd_run(const Common& c) {
    const RunConfig rc = resolve_config(c);
    const auto cfg = rc.scheme();
    cfg.validate();
    if (rc.trace && rc.experiment.dims.cells() > 10000) {
        throw ConfigError("scheme.trace", 0, "tracing is limited to grids of at most 10000 cells");
    }
    const auto prep = prepare_experiment(rc.experiment);
    const auto result = run_scheme(prep.grid, prep.m0, cfg);
    const fs::path dir = rc.out_dir;
    const std::string header = comment_header(rc.hash);

    const auto conc = concentrations(prep.grid, result.state.mass);
    write_grid_values_csv(prep.grid, conc, (dir / "concentration.csv").string(), header);
    write_grid_values_csv(prep.grid, event_map(result.metrics.cell_events), (dir / "event_map.csv").string(),
                          header);
    if (rc.trace) {
        auto out = open_output((dir / "trace.csv").string());
        out << header << "ordinal,face,t_hat,dm\n";
        for (const auto& r : result.trace) {
            out << r.ordinal << ',' << r.face << ',' << format_double(r.t_hat) << ',' << format_double(r.dm) << '\n';
        }
    }

    auto meta = metadata_base(rc, "run");
    const auto& m = result.metrics;
    meta["scheme"] = to_string(rc.variant);
    meta["delta_m"] = rc.delta_m;
    meta["final_time"] = rc.experiment.final_time;
    meta["cells"] = prep.grid.cell_count();
    meta["faces"] = m.n_faces;
    meta["n_events"] = m.n_events;
    meta["n_cascade"] = m.n_cascade;
    meta["dt_avg"] = m.dt_avg;
    meta["initial_mass"] = m.initial_mass;
    meta["final_mass"] = m.final_mass;
    meta["max_face_lag"] = m.max_face_lag;
    meta["wall_seconds"] = m.wall_seconds;
    write_metadata(meta, dir / "metadata.json");

    if (rc.verbosity > 0) {
        std::cout << "events " << m.n_events << ", dt_avg " << format_double(m.dt_avg) << ", wall "
                  << format_double(m.wall_seconds) << " s\n";
    }
    std::cout << "wrote " << dir.string() << '\n';
    return 0;
}

bool check_fits(const SweepResult& r) {
    bool ok = true;
    for (const auto& f : r.fits) {
        const bool err_ok = f.error.ok && f.error.slope >= 0.7 && f.error.slope <= 1.3;
        const bool n_ok = f.events.ok && f.events.slope >= -1.15 && f.events.slope <= -0.85;
        std::cout << (err_ok ? "PASS" : "FAIL") << " " << to_string(f.scheme) << " error slope "
                  << format_double(f.error.slope) << " in [0.7, 1.3]\n";
        std::cout << (n_ok ? "PASS" : "FAIL") << " " << to_string(f.scheme) << " N slope "
                  << format_double(f.events.slope) << " in [-1.15, -0.85]\n";
        ok = ok && err_ok && n_ok;
    }
    return ok;
}

int cmd_sweep(const Common& c) {
    const RunConfig rc = resolve_config(c);
    rc.experiment.validate();
    SweepOptions opts;
    opts.jobs = std::max(1u, c.jobs);
    opts.cache_dir = cache_dir();
    opts.on_row = [](const SweepRow& row) {
        std::cout << to_string(row.scheme) << " delta_m=" << format_double(row.delta_m);
        if (row.failed) {
            std::cout << " FAILED: " << row.failure << '\n';
        } else {
            std::cout << " error=" << format_double(row.error) << " N=" << row.n_events << '\n';
        }
        std::cout.flush();
    };
    const auto result = run_sweep(rc.experiment, opts);
    const fs::path dir = rc.out_dir;
    const std::string header = comment_header(rc.hash);
    write_sweep_csv(result, (dir / "sweep.csv").string(), header);
    const std::string summary = sweep_summary(result);
    {
        auto out = open_output((dir / "summary.txt").string());
        out << summary;
    }
    // event maps at the smallest delta_m of each scheme
    const auto prep = prepare_experiment(rc.experiment);
    for (auto v : rc.experiment.schemes) {
        const auto rows = rows_for(result, v);
        if (!rows.empty() && !rows.back().failed) {
            write_grid_values_csv(prep.grid, event_map(rows.back().cell_events),
                                  (dir / ("event_map_" + to_string(v) + ".csv")).string(), header);
        }
    }
    write_grid_values_csv(prep.grid, result.reference.concentration, (dir / "reference.csv").string(), header);

    auto meta = metadata_base(rc, "sweep");
    meta["reference_method"] = result.reference.method;
    meta["reference_accuracy"] = result.reference.accuracy;
    nlohmann::json walls = nlohmann::json::array();
    for (const auto& r : result.rows) {
        walls.push_back({{"scheme", to_string(r.scheme)}, {"delta_m", r.delta_m}, {"wall_seconds", r.wall_s}});
    }
    meta["runs"] = walls;
    write_metadata(meta, dir / "metadata.json");

    std::cout << summary;
    const bool any_failed =
        std::any_of(result.rows.begin(), result.rows.end(), [](const SweepRow& r) { return r.failed; });
    if (c.check && !check_fits(result)) {
        return kExitRuntime;
    }
    return any_failed ? kExitRuntime : 0;
}

int cmd_verify(const Common& c) {
    const Scale scale = parse_scale(c.scale);
    const auto lines = verification_suite(scale, c.seed >= 0 ? static_cast<std::uint64_t>(c.seed) : 1);
    const std::string table = format_verification_report(lines);
    std::cout << table;
    if (!c.out.empty()) {
        auto out = open_output((fs::path(c.out) / "verify.csv").string());
        out << table;
    }
    const bool ok = std::all_of(lines.begin(), lines.end(), [](const VerificationLine& l) { return l.pass; });
    std::cout << (ok ? "all checks passed\n" : "some checks FAILED\n");
    return ok ? 0 : kExitRuntime;
}

int cmd_export_grid(const Common& c) {
    const RunConfig rc = resolve_config(c);
    const auto prep = prepare_experiment(rc.experiment);
    const fs::path dir = rc.out_dir;
    const std::string header = comment_header(rc.hash);
    write_cells_csv(prep.grid, (dir / "cells.csv").string(), header);
    write_faces_csv(prep.grid, (dir / "faces.csv").string(), header);
    write_operator_triplets(assemble_operator(prep.grid), (dir / "operator.csv").string(), header);
    write_grid_values_csv(prep.grid, prep.grid.diffusivities(), (dir / "diffusivity.csv").string(), header);
    if (rc.experiment.fracture) {
        write_cell_set(prep.fracture_cells, (dir / "fracture_cells.txt").string());
    }
    std::cout << "wrote " << dir.string() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Asynchronous discrete-event finite-volume transport"};
    app.require_subcommand(1);
    Common c;

    auto add_common = [&](CLI::App* sub, bool with_experiment) {
        sub->add_option("--config", c.config, "Config file");
        sub->add_option("--out", c.out, "Output directory (overrides output.dir)");
        sub->add_option("--seed", c.seed, "Fracture walk seed override")->check(CLI::NonNegativeNumber);
        if (with_experiment) {
            sub->add_option("--experiment", c.experiment, "Named experiment when no config is given")
                ->check(CLI::IsMember({"fracture", "uniform3d", "reaction"}));
            sub->add_option("--scale", c.scale, "Experiment size")->check(CLI::IsMember({"desk", "full"}));
        }
    };

    auto* run = app.add_subcommand("run", "Run one simulation");
    add_common(run, false);
    run->add_flag("--trace", c.trace, "Write a per-event trace (small grids only)");

    auto* sweep = app.add_subcommand("sweep", "Run a delta_m sweep against the reference");
    add_common(sweep, true);
    sweep->add_option("--jobs", c.jobs, "Parallel runs")->check(CLI::PositiveNumber);
    sweep->add_flag("--check", c.check, "Fail unless fitted slopes fall in the expected ranges");

    auto* verify = app.add_subcommand("verify", "Check connection-matrix identities and scheme invariants");
    verify->add_option("--scale", c.scale, "Grid sizes")->check(CLI::IsMember({"desk", "full"}));
    verify->add_option("--seed", c.seed, "Random grid seed")->check(CLI::NonNegativeNumber);
    verify->add_option("--out", c.out, "Also write verify.csv here");

    auto* exp = app.add_subcommand("export-grid", "Write grid geometry, fields and operator");
    add_common(exp, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (*run) return cmd_run(c);
        if (*sweep) return cmd_sweep(c);
        if (*verify) return cmd_verify(c);
        if (*exp) return cmd_export_grid(c);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitRuntime;
}
