#include "asyncfv/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "asyncfv/io.hpp"

namespace asyncfv {

Scale parse_scale(const std::string& s) {
    if (s == "desk") return Scale::Desk;
    if (s == "full") return Scale::Full;
    throw std::invalid_argument("unknown scale '" + s + "' (expected desk or full)");
}

std::string to_string(Scale s) { return s == Scale::Desk ? "desk" : "full"; }

void ExperimentSpec::validate() const {
    if (ladder.empty()) {
        throw std::invalid_argument("experiment '" + name + "': empty delta_m ladder");
    }
    for (std::size_t i = 0; i < ladder.size(); ++i) {
        if (!(ladder[i] > 0.0)) {
            throw std::invalid_argument("experiment '" + name + "': ladder values must be > 0");
        }
        if (i > 0 && !(ladder[i] < ladder[i - 1])) {
            throw std::invalid_argument("experiment '" + name + "': ladder must be strictly decreasing");
        }
    }
    if (schemes.empty()) {
        throw std::invalid_argument("experiment '" + name + "': no schemes");
    }
    if (!(final_time > 0.0)) {
        throw std::invalid_argument("experiment '" + name + "': final_time must be > 0");
    }
}

namespace {

std::vector<double> geometric_ladder(double first, double ratio, int count) {
    std::vector<double> v;
    double x = first;
    for (int i = 0; i < count; ++i) {
        v.push_back(x);
        x /= ratio;
    }
    return v;
}

constexpr std::uint64_t kFractureSeed = 20;

}  // namespace

ExperimentSpec experiment_fracture(Scale scale) {
    ExperimentSpec s;
    s.name = "fracture";
    s.extent = {10.0, 10.0, 10.0};
    s.dims = scale == Scale::Full ? Dims{100, 100, 1} : Dims{50, 50, 1};
    s.fields.velocity = {1.0, 0.0, 0.0};
    s.fields.initial = PointSource{{4.95, 9.95, 5.0}, 1.0};
    s.fracture = true;
    s.seed = kFractureSeed;
    s.fracture_d = 100.0;
    s.matrix_d = 0.1;
    s.schemes = {Variant::Bas, Variant::Bast, Variant::BasCasc};
    s.final_time = 2.4;
    s.ladder = scale == Scale::Full ? geometric_ladder(1e-5, 10.0, 5) : geometric_ladder(1e-4, std::sqrt(10.0), 6);
    return s;
}

ExperimentSpec experiment_uniform3d(Scale scale) {
    ExperimentSpec s;
    s.name = "uniform3d";
    s.extent = {10.0, 10.0, 10.0};
    s.dims = scale == Scale::Full ? Dims{40, 40, 32} : Dims{10, 10, 8};
    s.fields.diffusivity = UniformDiffusivity{2.0};
    s.fields.velocity = {0.1, 1.1, 0.0};
    s.fields.initial = SineLine{};
    s.schemes = {Variant::Bas, Variant::Bast, Variant::BasCasc};
    s.final_time = 2.4;
    s.ladder = scale == Scale::Full ? geometric_ladder(1.953e-6, 10.0, 5) : geometric_ladder(1.953e-4, 4.0, 5);
    return s;
}

ExperimentSpec experiment_reaction(Scale scale) {
    ExperimentSpec s;
    s.name = "reaction";
    s.extent = {10.0, 10.0, 10.0};
    s.dims = scale == Scale::Full ? Dims{100, 100, 1} : Dims{50, 50, 1};
    s.fields.diffusivity = UniformDiffusivity{1.0};
    s.fields.velocity = {0.0, 0.0, 0.0};
    s.fields.initial = PointSource{{4.95, 5.05, 5.0}, 1.0};
    s.schemes = {Variant::Bas, Variant::Bast};
    s.final_time = 1.0;
    s.reaction = langmuir_reaction();
    s.ladder = scale == Scale::Full ? geometric_ladder(1e-5, 10.0, 5) : geometric_ladder(1e-4, std::sqrt(10.0), 7);
    return s;
}

ExperimentSpec experiment_by_name(const std::string& name, Scale scale) {
    if (name == "fracture") return experiment_fracture(scale);
    if (name == "uniform3d") return experiment_uniform3d(scale);
    if (name == "reaction") return experiment_reaction(scale);
    throw std::invalid_argument("unknown experiment '" + name + "' (expected fracture, uniform3d or reaction)");
}

PreparedExperiment prepare_experiment(const ExperimentSpec& spec) {
    PreparedExperiment p;
    FieldSpec fields = spec.fields;
    if (spec.fracture) {
        const Grid plain = build_cartesian(spec.dims, spec.extent, FieldSpec{});
        p.fracture_cells = fracture_random_walk(plain, spec.seed, spec.walk).cells();
        fields.diffusivity = FractureDiffusivity{p.fracture_cells, spec.fracture_d, spec.matrix_d};
    }
    p.grid = build_cartesian(spec.dims, spec.extent, fields);
    p.m0 = apply_initial_condition(p.grid, fields.initial);
    return p;
}

SchemeConfig scheme_config(const ExperimentSpec& spec, Variant variant, double delta_m) {
    SchemeConfig cfg;
    cfg.variant = variant;
    cfg.delta_m = delta_m;
    cfg.final_time = spec.final_time;
    cfg.reaction = spec.reaction;
    cfg.max_events = spec.max_events;
    return cfg;
}

ReferenceSolution obtain_reference(const ExperimentSpec& spec, const PreparedExperiment& prep,
                                   const std::string& cache_dir) {
    const std::string method = spec.reaction ? "strang-richardson"
                               : spec.reference_method == ExpmMethod::Krylov ? "expm-krylov"
                               : spec.reference_method == ExpmMethod::Dense ? "expm-dense"
                                                                             : "expm-auto";
    const std::string reaction = spec.reaction ? spec.reaction->descriptor : "";
    std::optional<ReferenceCache> cache;
    std::uint64_t key = 0;
    if (!cache_dir.empty()) {
        cache.emplace(cache_dir);
        key = ReferenceCache::key(prep.grid, prep.m0, spec.final_time, method, spec.reference_tol, reaction);
        if (auto hit = cache->load(key); hit && hit->mass.size() == prep.m0.size()) {
            hit->concentration = concentrations(prep.grid, hit->mass);
            return *hit;
        }
    }
    auto ref = compute_reference(prep.grid, prep.m0, spec.final_time, spec.reaction, spec.reference_tol,
                                 spec.reference_method);
    if (cache) {
        cache->store(key, ref);
    }
    return ref;
}

SlopeFit fit_loglog(std::span<const double> x, std::span<const double> y) {
    SlopeFit fit;
    const std::size_t n = std::min(x.size(), y.size());
    if (n < 2) {
        return fit;
    }
    std::vector<double> lx(n), ly(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) {
            return fit;
        }
        lx[i] = std::log10(x[i]);
        ly[i] = std::log10(y[i]);
    }
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / static_cast<double>(n);
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    if (sxx == 0.0) {
        return fit;
    }
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = ly[i] - (fit.intercept + fit.slope * lx[i]);
        ss += r * r;
    }
    fit.residual = std::sqrt(ss / static_cast<double>(n));
    fit.count = n;
    fit.ok = true;
    return fit;
}

SlopeFit fit_regime_slope(std::span<const double> x, std::span<const double> y, double regime_tolerance) {
    const std::size_t n = std::min(x.size(), y.size());
    if (n < 2) {
        return {};
    }
    std::vector<double> local(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0) || !(x[i + 1] > 0.0) || !(y[i + 1] > 0.0)) {
            return {};
        }
        local[i] = (std::log10(y[i + 1]) - std::log10(y[i])) / (std::log10(x[i + 1]) - std::log10(x[i]));
    }
    // grow the suffix backwards while every pair of local slopes stays within tolerance
    std::size_t first_slope = n - 2;
    double lo = local[first_slope], hi = local[first_slope];
    while (first_slope > 0) {
        const double s = local[first_slope - 1];
        const double nlo = std::min(lo, s), nhi = std::max(hi, s);
        const double scale = std::max(std::abs(nlo), std::abs(nhi));
        if (nhi - nlo > regime_tolerance * scale) {
            break;
        }
        lo = nlo;
        hi = nhi;
        --first_slope;
    }
    auto fit = fit_loglog(x.subspan(first_slope, n - first_slope), y.subspan(first_slope, n - first_slope));
    fit.first = first_slope;
    return fit;
}

SweepResult run_sweep(const ExperimentSpec& spec, const SweepOptions& opts) {
    spec.validate();
    const auto prep = prepare_experiment(spec);
    SweepResult result;
    result.name = spec.name;
    result.reference = obtain_reference(spec, prep, opts.cache_dir);

    struct Job {
        Variant scheme;
        double delta_m;
    };
    std::vector<Job> jobs;
    for (auto v : spec.schemes) {
        for (double dm : spec.ladder) {
            jobs.push_back({v, dm});
        }
    }
    result.rows.resize(jobs.size());
    const double m0_total = std::accumulate(prep.m0.begin(), prep.m0.end(), 0.0);

    std::atomic<std::size_t> next{0};
    std::mutex report_mutex;
    auto worker = [&]() {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
            SweepRow row;
            row.scheme = jobs[i].scheme;
            row.delta_m = jobs[i].delta_m;
            row.n_faces = prep.grid.face_count();
            try {
                const auto run = run_scheme(prep.grid, prep.m0, scheme_config(spec, row.scheme, row.delta_m));
                const auto c = concentrations(prep.grid, run.state.mass);
                row.error = discrete_l2_error(c, result.reference.concentration);
                row.n_events = run.metrics.n_events;
                row.dt_avg = run.metrics.dt_avg;
                row.wall_s = run.metrics.wall_seconds;
                row.mass_drift = m0_total != 0.0 ? std::abs(run.metrics.final_mass - m0_total) / std::abs(m0_total)
                                                 : std::abs(run.metrics.final_mass);
                row.faces_at_final_time =
                    std::all_of(run.state.face_time.begin(), run.state.face_time.end(),
                                [&](double t) { return t == spec.final_time; });
                if (opts.keep_cell_events) {
                    row.cell_events = run.metrics.cell_events;
                }
            } catch (const std::exception& e) {
                row.failed = true;
                row.failure = e.what();
            }
            result.rows[i] = std::move(row);
            if (opts.on_row) {
                std::lock_guard lock(report_mutex);
                opts.on_row(result.rows[i]);
            }
        }
    };
    const unsigned nthreads = std::max(1u, std::min<unsigned>(opts.jobs, static_cast<unsigned>(jobs.size())));
    if (nthreads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < nthreads; ++t) {
            pool.emplace_back(worker);
        }
        for (auto& th : pool) {
            th.join();
        }
    }

    for (auto v : spec.schemes) {
        SchemeFits f;
        f.scheme = v;
        std::vector<double> dm, err, n, dt;
        for (const auto& r : result.rows) {
            if (r.scheme != v || r.failed) {
                continue;
            }
            dm.push_back(r.delta_m);
            err.push_back(r.error);
            n.push_back(static_cast<double>(r.n_events));
            dt.push_back(r.dt_avg);
        }
        f.error = fit_regime_slope(dm, err, spec.regime_tolerance);
        f.events = fit_regime_slope(dm, n, spec.regime_tolerance);
        f.dt_avg = fit_regime_slope(dm, dt, spec.regime_tolerance);
        result.fits.push_back(f);
    }
    return result;
}

std::vector<SweepRow> rows_for(const SweepResult& result, Variant scheme) {
    std::vector<SweepRow> out;
    for (const auto& r : result.rows) {
        if (r.scheme == scheme) {
            out.push_back(r);
        }
    }
    return out;
}

std::vector<double> event_map(std::span<const std::uint64_t> cell_events) {
    std::vector<double> out(cell_events.size());
    for (std::size_t j = 0; j < cell_events.size(); ++j) {
        out[j] = std::log10(1.0 + static_cast<double>(cell_events[j]));
    }
    return out;
}

std::vector<double> event_map(const Grid& grid, const SimState& state) {
    std::vector<std::uint64_t> counts(grid.cell_count(), 0);
    for (std::size_t j = 0; j < grid.cell_count(); ++j) {
        for (auto k : grid.cell_faces(j)) {
            counts[j] += state.face_events[k];
        }
    }
    return event_map(counts);
}

void write_sweep_csv(const SweepResult& result, const std::string& path, const std::string& header) {
    auto out = open_output(path);
    out << header << "scheme,delta_m,error,n_events,dt_avg,wall_s\n";
    for (const auto& r : result.rows) {
        out << to_string(r.scheme) << ',' << format_double(r.delta_m) << ',';
        if (r.failed) {
            out << "nan,0,nan,nan\n";
            continue;
        }
        out << format_double(r.error) << ',' << r.n_events << ',' << format_double(r.dt_avg) << ','
            << format_double(r.wall_s) << '\n';
    }
}

std::string sweep_summary(const SweepResult& result) {
    std::ostringstream out;
    out << "experiment " << result.name << " (reference: " << result.reference.method << ")\n";
    auto line = [&](const char* what, const SlopeFit& f) {
        out << "  " << what << ": ";
        if (!f.ok) {
            out << "n/a\n";
            return;
        }
        out << "slope " << format_double(f.slope) << " over " << f.count << " points from index " << f.first
            << " (rms residual " << format_double(f.residual) << ")\n";
    };
    for (const auto& f : result.fits) {
        out << to_string(f.scheme) << '\n';
        line("error vs delta_m", f.error);
        line("N vs delta_m", f.events);
        line("dt_avg vs delta_m", f.dt_avg);
    }
    for (const auto& r : result.rows) {
        if (r.failed) {
            out << "FAILED " << to_string(r.scheme) << " delta_m=" << format_double(r.delta_m) << ": " << r.failure
                << '\n';
        }
    }
    return out.str();
}

void write_grid_values_csv(const Grid& grid, std::span<const double> values, const std::string& path,
                           const std::string& header) {
    auto out = open_output(path);
    out << header;
    const auto& d = grid.dims();
    for (int k = 0; k < d.nz; ++k) {
        if (d.nz > 1) {
            out << "# z=" << k << '\n';
        }
        for (int j = 0; j < d.ny; ++j) {
            for (int i = 0; i < d.nx; ++i) {
                if (i) out << ',';
                out << format_double(values[grid.cell_index(i, j, k)]);
            }
            out << '\n';
        }
    }
}

std::vector<VerificationLine> verification_suite(Scale scale, std::uint64_t seed) {
    std::vector<VerificationLine> lines;
    auto add = [&](std::string identity, std::string grid, double value, double tol) {
        lines.push_back({std::move(identity), std::move(grid), value, tol, std::isfinite(value) && value <= tol});
    };
    auto label = [](const Dims& d) { return std::to_string(d.nx) + "x" + std::to_string(d.ny); };

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const int max_side = scale == Scale::Full ? 8 : 5;
    std::uniform_int_distribution<int> side(1, max_side);
    for (int g = 0; g < 10; ++g) {
        Dims d{side(rng), side(rng), 1};
        if (d.nx * d.ny < 2) d.nx = 2;
        std::vector<double> dvals(d.cells());
        for (auto& x : dvals) x = 0.1 + 1.9 * unit(rng);
        FieldSpec fields;
        fields.diffusivity = ExplicitDiffusivity{dvals};
        fields.velocity = {2.0 * unit(rng) - 1.0, 2.0 * unit(rng) - 1.0, 0.0};
        const Grid grid = build_cartesian(d, {static_cast<double>(d.nx), static_cast<double>(d.ny), 1.0}, fields);
        std::vector<double> m0(grid.cell_count());
        for (auto& x : m0) x = unit(rng);
        const auto op = assemble_operator(grid);
        const auto sys = build_connection_system(grid, m0);
        const double t = 0.1 + 0.9 * unit(rng);
        add("exponential_identity", label(d), verify_exponential_identity(sys, op, m0, t), 1e-9);
        double colsum = 0.0;
        for (Eigen::Index c = 0; c < op.outerSize(); ++c) {
            double s = 0.0;
            for (SparseOperator::InnerIterator it(op, c); it; ++it) s += it.value();
            colsum = std::max(colsum, std::abs(s));
        }
        add("operator_column_sum", label(d), colsum, 1e-13);
    }

    struct Case {
        Dims dims;
        Vec3 velocity;
    };
    for (const Case& c : {Case{{3, 1, 1}, {0.5, 0.0, 0.0}}, Case{{2, 2, 1}, {0.5, 0.5, 0.0}}}) {
        FieldSpec fields;
        fields.velocity = c.velocity;
        fields.initial = PointSource{{0.5, 0.5, 0.5}, 1.0};
        const Grid grid =
            build_cartesian(c.dims, {static_cast<double>(c.dims.nx), static_cast<double>(c.dims.ny), 1.0}, fields);
        const auto m0 = apply_initial_condition(grid, fields.initial);
        SchemeConfig cfg;
        cfg.delta_m = 1e-4;
        cfg.final_time = 1.0;
        const auto run = run_bas(grid, m0, cfg);
        const auto sys = build_connection_system(grid, m0);
        const auto rep = verify_state_representation(run.state, sys, m0, cfg.delta_m);
        add("state_representation", label(c.dims), rep.residual ? *rep.residual : std::nan(""), 1e-10);
        const auto flux = flux_consistency_check(run.state, sys, assemble_operator(grid), cfg.delta_m);
        add("flux_consistency", label(c.dims), flux.max_cell_difference, 1e-10);
        const double total0 = std::accumulate(m0.begin(), m0.end(), 0.0);
        const double total = std::accumulate(run.state.mass.begin(), run.state.mass.end(), 0.0);
        add("mass_conservation", label(c.dims), std::abs(total - total0) / total0, 1e-12);
        const bool all_at_t = std::all_of(run.state.face_time.begin(), run.state.face_time.end(),
                                          [&](double t) { return t == cfg.final_time; });
        add("faces_at_final_time", label(c.dims), all_at_t ? 0.0 : 1.0, 0.0);
        add("dt_avg_identity", label(c.dims),
            std::abs(run.metrics.dt_avg * static_cast<double>(run.metrics.n_events) -
                     cfg.final_time * static_cast<double>(grid.face_count())) /
                (cfg.final_time * static_cast<double>(grid.face_count())),
            1e-12);
    }

    {
        FieldSpec fields;
        fields.initial = ExplicitConcentration{{1.0, 0.0}};
        const Grid grid = build_cartesian({2, 1, 1}, {2.0, 1.0, 1.0}, fields);
        const auto m0 = apply_initial_condition(grid, fields.initial);
        SchemeConfig cfg;
        cfg.delta_m = 1e-6;
        cfg.final_time = 1.0;
        const auto run = run_bas(grid, m0, cfg);
        const double e = std::exp(-2.0);
        const std::vector<double> exact{(1.0 + e) / 2.0, (1.0 - e) / 2.0};
        add("two_cell_closed_form", "2x1", discrete_l2_error(concentrations(grid, run.state.mass), exact), 1e-3);
    }
    return lines;
}

}  // namespace asyncfv
