#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "asyncfv/grid.hpp"

namespace asyncfv {

enum class Variant { Bas, Bast, BasCasc };

std::string to_string(Variant v);
/// Accepts "bas", "bast", "casc" / "bas-casc" (case-insensitive).
Variant parse_variant(const std::string& name);

/// Autonomous reaction r(c) in concentration units per second.
struct ReactionTerm {
    std::function<double(double)> rate;
    std::string descriptor;
};

/// r(c) = -c / (1 + c)
ReactionTerm langmuir_reaction();

struct SchemeConfig {
    double delta_m = 1e-6;
    double final_time = 1.0;
    Variant variant = Variant::Bas;
    std::optional<ReactionTerm> reaction;
    /// Faces with |f_k| A_k at or below this are scheduled directly at T.
    double flux_floor = 1e-300;
    /// Cascade trigger level; <= 0 means delta_m.
    double cascade_threshold = 0.0;
    std::uint64_t max_events = 1'000'000'000ULL;
    /// Stop cleanly once this many events have fired (0 runs to T). The
    /// event that crosses the count completes, cascades included.
    std::uint64_t stop_after_events = 0;
    /// Log progress to std::clog every this many events; 0 disables.
    std::uint64_t progress_interval = 0;
    /// Record (ordinal, face, t_hat, dm) per event.
    bool trace = false;

    double trigger_level() const { return cascade_threshold > 0.0 ? cascade_threshold : delta_m; }
    void validate() const;
};

/// Dynamic state of one run. Transfers are signed along z_k: a positive
/// transfer moves mass from cell_hi into cell_lo.
struct SimState {
    std::vector<double> mass;
    std::vector<double> cell_time;
    std::vector<double> face_time;
    std::vector<double> update_time;
    std::vector<double> face_flux;
    std::vector<double> mass_passed;
    std::vector<std::uint64_t> face_events;
    /// Sum of signed transfers per face, in mass units.
    std::vector<double> signed_transfer;
    /// -1, 0, +1: sign of the first nonzero transfer.
    std::vector<std::int8_t> transfer_sign;
    std::vector<std::uint8_t> reversed;
    double system_time = 0.0;
    /// Sum over events of (t_hat - t_k) of the active face.
    double dt_sum = 0.0;
    std::uint64_t cascade_events = 0;
    /// Largest observed max_k |t_k - system_time|, sampled during the run.
    double max_face_lag = 0.0;

    bool any_reversal() const;
};

struct TraceRecord {
    std::uint64_t ordinal = 0;
    std::uint32_t face = 0;
    double t_hat = 0.0;
    double dm = 0.0;  ///< signed transfer
};

struct RunMetrics {
    std::uint64_t n_events = 0;
    std::uint64_t n_cascade = 0;
    std::size_t n_faces = 0;
    double dt_avg = 0.0;
    double wall_seconds = 0.0;
    double initial_mass = 0.0;
    double final_mass = 0.0;
    double max_face_lag = 0.0;
    std::vector<std::uint64_t> cell_events;
};

struct RunResult {
    SimState state;
    RunMetrics metrics;
    std::vector<TraceRecord> trace;
};

class RunawayError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Projected update time of face k from the cached flux (and, for BAST, the
/// mass-passed value), clamped into [t_k, T].
double projected_update_time(const Grid& grid, const SimState& state, const SchemeConfig& cfg, std::size_t k);

/// Magnitude of the mass an event on face k would move, given t_hat_k.
double event_mass(const Grid& grid, const SimState& state, const SchemeConfig& cfg, std::size_t k);

/// Leapfrog reaction around one transfer on face k: half step, transfer of
/// `signed_dm`, half step, then both cell clocks set to t_hat.
void reaction_event_wrap(const Grid& grid, SimState& state, const ReactionTerm& reaction, std::size_t k,
                         double t_hat, double signed_dm);

RunResult run_bas(const Grid& grid, std::span<const double> m0, const SchemeConfig& cfg);
RunResult run_bast(const Grid& grid, std::span<const double> m0, const SchemeConfig& cfg);
RunResult run_bas_casc(const Grid& grid, std::span<const double> m0, const SchemeConfig& cfg);
/// Dispatches on cfg.variant.
RunResult run_scheme(const Grid& grid, std::span<const double> m0, const SchemeConfig& cfg);

RunMetrics run_metrics(const Grid& grid, const SimState& state, const SchemeConfig& cfg);

}  // namespace asyncfv
