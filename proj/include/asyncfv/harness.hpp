#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "asyncfv/diagnostics.hpp"
#include "asyncfv/grid.hpp"
#include "asyncfv/norms.hpp"
#include "asyncfv/reference.hpp"
#include "asyncfv/schemes.hpp"

namespace asyncfv {

enum class Scale { Desk, Full };

Scale parse_scale(const std::string& s);
std::string to_string(Scale s);

struct ExperimentSpec {
    std::string name = "custom";
    Dims dims;
    Vec3 extent{1.0, 1.0, 1.0};
    FieldSpec fields;
    /// When set, diffusivity is replaced by a random-walk fracture map.
    bool fracture = false;
    std::uint64_t seed = 0;
    WalkOptions walk;
    double fracture_d = 100.0;
    double matrix_d = 0.1;

    std::vector<Variant> schemes{Variant::Bas};
    /// Strictly decreasing mass units.
    std::vector<double> ladder;
    double final_time = 1.0;
    std::optional<ReactionTerm> reaction;
    double reference_tol = 1e-10;
    ExpmMethod reference_method = ExpmMethod::Auto;
    /// Local slopes in the fitted regime agree to within this fraction.
    double regime_tolerance = 0.3;
    std::uint64_t max_events = 1'000'000'000ULL;

    void validate() const;
};

ExperimentSpec experiment_fracture(Scale scale = Scale::Full);
ExperimentSpec experiment_uniform3d(Scale scale = Scale::Full);
ExperimentSpec experiment_reaction(Scale scale = Scale::Full);
ExperimentSpec experiment_by_name(const std::string& name, Scale scale);

struct PreparedExperiment {
    Grid grid;
    std::vector<double> m0;
    std::vector<std::size_t> fracture_cells;
};

PreparedExperiment prepare_experiment(const ExperimentSpec& spec);

SchemeConfig scheme_config(const ExperimentSpec& spec, Variant variant, double delta_m);

/// Reference for the prepared experiment, read from or written to `cache_dir`
/// when it is non-empty.
ReferenceSolution obtain_reference(const ExperimentSpec& spec, const PreparedExperiment& prep,
                                   const std::string& cache_dir);

struct SweepRow {
    Variant scheme = Variant::Bas;
    double delta_m = 0.0;
    double error = 0.0;
    std::uint64_t n_events = 0;
    double dt_avg = 0.0;
    double wall_s = 0.0;
    std::size_t n_faces = 0;
    /// |sum m_T - sum m_0| / sum m_0
    double mass_drift = 0.0;
    bool faces_at_final_time = false;
    bool failed = false;
    std::string failure;
    std::vector<std::uint64_t> cell_events;
};

struct SlopeFit {
    bool ok = false;
    double slope = 0.0;
    double intercept = 0.0;
    /// RMS residual of the log-log fit.
    double residual = 0.0;
    std::size_t first = 0;
    std::size_t count = 0;
};

struct SchemeFits {
    Variant scheme = Variant::Bas;
    SlopeFit error;
    SlopeFit events;
    SlopeFit dt_avg;
};

struct SweepResult {
    std::string name;
    std::vector<SweepRow> rows;
    std::vector<SchemeFits> fits;
    ReferenceSolution reference;
};

struct SweepOptions {
    unsigned jobs = 1;
    std::string cache_dir;
    bool keep_cell_events = true;
    std::function<void(const SweepRow&)> on_row;
};

/// Runs every (scheme, delta_m) pair; a failing run is recorded in its row.
SweepResult run_sweep(const ExperimentSpec& spec, const SweepOptions& opts = {});

/// Least-squares slope of log10(y) on log10(x) over the longest trailing run
/// of points whose consecutive local slopes agree within `regime_tolerance`.
/// Points are taken in the given order (largest delta_m first).
SlopeFit fit_regime_slope(std::span<const double> x, std::span<const double> y, double regime_tolerance);

/// Plain least-squares slope of log10(y) on log10(x).
SlopeFit fit_loglog(std::span<const double> x, std::span<const double> y);

std::vector<SweepRow> rows_for(const SweepResult& result, Variant scheme);

/// log10(1 + events) per cell; cell events sum the events of its faces.
std::vector<double> event_map(const Grid& grid, const SimState& state);
std::vector<double> event_map(std::span<const std::uint64_t> cell_events);

void write_sweep_csv(const SweepResult& result, const std::string& path, const std::string& header);
std::string sweep_summary(const SweepResult& result);
/// One CSV row per y-index; 3D grids write one block per z-layer.
void write_grid_values_csv(const Grid& grid, std::span<const double> values, const std::string& path,
                           const std::string& header);

/// Identity checks on small random grids plus scheme invariants; desk keeps
/// grids at 5x5 or below.
std::vector<VerificationLine> verification_suite(Scale scale, std::uint64_t seed = 1);

}  // namespace asyncfv
