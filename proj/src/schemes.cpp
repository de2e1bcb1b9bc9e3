#include "asyncfv/schemes.hpp"

#include <algorithm>
#include <cassert>
#include <chrono>
#include <cmath>
#include <iostream>
#include <numeric>
#include <sstream>

#include "asyncfv/discretization.hpp"
#include "asyncfv/event_queue.hpp"

namespace asyncfv {

std::string to_string(Variant v) {
    switch (v) {
        case Variant::Bas:
            return "BAS";
        case Variant::Bast:
            return "BAST";
        case Variant::BasCasc:
            return "BAS-casc";
    }
    return "?";
}

Variant parse_variant(const std::string& name) {
    std::string s(name);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "bas") return Variant::Bas;
    if (s == "bast") return Variant::Bast;
    if (s == "casc" || s == "bas-casc" || s == "bas_casc") return Variant::BasCasc;
    throw std::invalid_argument("unknown scheme variant '" + name + "'");
}

ReactionTerm langmuir_reaction() {
    return {[](double c) { return -c / (1.0 + c); }, "langmuir: r(c) = -c/(1+c)"};
}

void SchemeConfig::validate() const {
    if (!(delta_m > 0.0) || !std::isfinite(delta_m)) {
        throw std::invalid_argument("delta_m must be > 0");
    }
    if (!(final_time > 0.0) || !std::isfinite(final_time)) {
        throw std::invalid_argument("final_time must be > 0");
    }
    if (!(flux_floor >= 0.0)) {
        throw std::invalid_argument("flux_floor must be >= 0");
    }
    if (reaction && !reaction->rate) {
        throw std::invalid_argument("reaction term has no evaluator");
    }
}

bool SimState::any_reversal() const {
    return std::any_of(reversed.begin(), reversed.end(), [](std::uint8_t r) { return r != 0; });
}

namespace {

enum class Kind : std::uint8_t { Interior, Sync, Clamped };

struct Projection {
    double time;
    Kind kind;
};

inline double sign_of(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

/// Shared update-time rule. `flow` is the signed A_k f_k, `passed` the
/// mass-passed value (zero unless it shortens the interval).
inline Projection project(double t, double flow, double passed, double delta_m, double final_time,
                          double floor) {
    const double rate = std::abs(flow);
    if (rate <= floor) {
        return {final_time, Kind::Sync};
    }
    const double remaining = delta_m - sign_of(flow) * passed;
    if (remaining <= 0.0) {
        return {t, Kind::Clamped};
    }
    const double t_hat = t + remaining / rate;
    if (t_hat <= final_time) {
        return {t_hat, Kind::Interior};
    }
    return {final_time, Kind::Sync};
}

inline void half_step(const Grid& grid, SimState& s, const ReactionTerm& r, std::size_t cell, double dt) {
    if (dt <= 0.0) {
        return;
    }
    const double vol = grid.volume(cell);
    const double c = s.mass[cell] / vol;
    const double rate = r.rate(c);
    if (!std::isfinite(rate)) {
        std::ostringstream msg;
        msg << "reaction term is not finite in cell " << cell << " at concentration " << c;
        throw std::runtime_error(msg.str());
    }
    s.mass[cell] += vol * 0.5 * dt * rate;
}

/// Leapfrog around `transfer(lo, hi)`.
template <class Transfer>
void wrap_transfer(const Grid& grid, SimState& state, const ReactionTerm& reaction, std::size_t k, double t_hat,
                   Transfer&& transfer) {
    const auto& f = grid.face(k);
    const std::size_t cells[2] = {f.cell_lo, f.cell_hi};
    double dt[2];
    for (int i = 0; i < 2; ++i) {
        // a lagging face can fire behind a cell clock; that cell gets no reaction
        dt[i] = std::max(0.0, t_hat - state.cell_time[cells[i]]);
        half_step(grid, state, reaction, cells[i], dt[i]);
    }
    transfer(f.cell_lo, f.cell_hi);
    for (int i = 0; i < 2; ++i) {
        half_step(grid, state, reaction, cells[i], dt[i]);
        state.cell_time[cells[i]] = std::max(state.cell_time[cells[i]], t_hat);
    }
}

class Engine {
public:
    Engine(const Grid& grid, std::span<const double> m0, const SchemeConfig& cfg)
        : grid_(grid), cfg_(cfg), tracking_(cfg.variant != Variant::Bas), casc_(cfg.variant == Variant::BasCasc) {
        cfg_.validate();
        if (m0.size() != grid.cell_count()) {
            throw std::invalid_argument("initial mass vector length does not match the grid");
        }
        const std::size_t nf = grid.face_count();
        const std::size_t nc = grid.cell_count();
        auto& s = result_.state;
        s.mass.assign(m0.begin(), m0.end());
        s.cell_time.assign(nc, 0.0);
        s.face_time.assign(nf, 0.0);
        s.update_time.assign(nf, 0.0);
        s.face_flux.assign(nf, 0.0);
        s.mass_passed.assign(nf, 0.0);
        s.face_events.assign(nf, 0);
        s.signed_transfer.assign(nf, 0.0);
        s.transfer_sign.assign(nf, 0);
        s.reversed.assign(nf, 0);
        comp_.assign(nc, 0.0);

        lo_.resize(nf);
        hi_.resize(nf);
        a_.resize(nf);
        b_.resize(nf);
        flow_.assign(nf, 0.0);
        kind_.assign(nf, Kind::Sync);
        retired_.assign(nf, 0);
        last_dt_.assign(nf, 0.0);
        for (std::size_t k = 0; k < nf; ++k) {
            const auto& f = grid.face(k);
            const auto c = connection_coeffs(grid, k);
            lo_[k] = f.cell_lo;
            hi_[k] = f.cell_hi;
            a_[k] = c.a;
            b_[k] = c.b;
        }
        for (std::size_t k = 0; k < nf; ++k) {
            compute(k);
        }
        queue_ = IndexedMinQueue(s.update_time);
        initial_mass_ = std::accumulate(m0.begin(), m0.end(), 0.0);
        lag_interval_ = std::max<std::uint64_t>(65536, 4 * nf);
    }

    RunResult run() {
        const auto start = std::chrono::steady_clock::now();
        while (!queue_.empty()) {
            const auto [k, t_hat] = queue_.top();
            own_event(k, t_hat);
            if (cfg_.stop_after_events != 0 && events_ >= cfg_.stop_after_events) {
                break;
            }
        }
        auto& s = result_.state;
        for (std::size_t j = 0; j < comp_.size(); ++j) {
            s.mass[j] += comp_[j];
        }
        for (std::size_t k = 0; k < flow_.size(); ++k) {
            s.face_flux[k] = flow(k) / grid_.face(k).area;
        }
        s.max_face_lag = max_lag_;
        result_.metrics = run_metrics(grid_, s, cfg_);
        result_.metrics.initial_mass = initial_mass_;
        result_.metrics.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        return std::move(result_);
    }

private:
    double flow(std::size_t k) const {
        const auto& m = result_.state.mass;
        return b_[k] * m[hi_[k]] - a_[k] * m[lo_[k]];
    }

    void compute(std::size_t k) {
        auto& s = result_.state;
        flow_[k] = flow(k);
        const double passed = cfg_.variant == Variant::Bast ? s.mass_passed[k] : 0.0;
        const auto p = project(s.face_time[k], flow_[k], passed, cfg_.delta_m, cfg_.final_time, cfg_.flux_floor);
        s.update_time[k] = p.time;
        kind_[k] = p.kind;
    }

    void refresh(std::size_t k) {
        compute(k);
        queue_.update_key(static_cast<IndexedMinQueue::Id>(k), result_.state.update_time[k]);
    }

    void own_event(std::size_t k, double t_hat) {
        auto& s = result_.state;
        const double t_k = s.face_time[k];
        double dm;
        if (kind_[k] == Kind::Sync) {
            dm = s.mass_passed[k] + flow_[k] * (t_hat - t_k);
            s.mass_passed[k] = 0.0;
        } else {
            dm = sign_of(flow_[k]) * cfg_.delta_m;
            if (cfg_.variant == Variant::Bast) {
                // an unclamped interval accounts for exactly delta_m including the passed value
                s.mass_passed[k] = kind_[k] == Kind::Clamped ? s.mass_passed[k] - dm : 0.0;
            }
        }
        apply(k, t_hat, dm);
        s.dt_sum += t_hat - t_k;
        last_dt_[k] = t_hat - t_k;
        s.face_time[k] = t_hat;
        s.system_time = t_hat;
        if (t_hat >= cfg_.final_time && s.mass_passed[k] == 0.0) {
            queue_.pop_min();
            retired_[k] = 1;
        } else {
            refresh(k);
        }
        touch_associated(k, t_hat);
        if (casc_) {
            cascade(t_hat);
        }
    }

    void touch_associated(std::size_t k, double now) {
        auto& s = result_.state;
        const double trigger = cfg_.trigger_level();
        for (const auto l : grid_.associated_faces(k)) {
            if (l == k || retired_[l]) {
                continue;
            }
            if (tracking_) {
                assert(s.face_time[l] <= now);
                s.mass_passed[l] += (now - s.face_time[l]) * flow_[l];
                s.face_time[l] = now;
            }
            refresh(l);
            if (casc_ && std::abs(s.mass_passed[l]) > trigger) {
                stack_.push_back(l);
            }
        }
    }

    void cascade(double now) {
        auto& s = result_.state;
        const double trigger = cfg_.trigger_level();
        while (!stack_.empty()) {
            const std::size_t l = stack_.back();
            stack_.pop_back();
            if (retired_[l] || !(std::abs(s.mass_passed[l]) > trigger)) {
                continue;
            }
            const double dm = sign_of(s.mass_passed[l]) * cfg_.delta_m;
            s.mass_passed[l] -= dm;
            apply(l, now, dm);
            ++s.cascade_events;
            last_dt_[l] = 0.0;
            refresh(l);
            touch_associated(l, now);
            if (std::abs(s.mass_passed[l]) > trigger) {
                stack_.push_back(l);
            }
        }
    }

    void apply(std::size_t k, double t_hat, double dm) {
        auto& s = result_.state;
        if (cfg_.reaction) {
            wrap_transfer(grid_, s, *cfg_.reaction, k, t_hat, [&](std::size_t lo, std::size_t hi) {
                add_mass(lo, dm);
                add_mass(hi, -dm);
            });
        } else {
            add_mass(lo_[k], dm);
            add_mass(hi_[k], -dm);
        }
        ++s.face_events[k];
        s.signed_transfer[k] += dm;
        if (dm != 0.0) {
            const auto sg = static_cast<std::int8_t>(dm > 0.0 ? 1 : -1);
            if (s.transfer_sign[k] == 0) {
                s.transfer_sign[k] = sg;
            } else if (s.transfer_sign[k] != sg) {
                s.reversed[k] = 1;
            }
        }
        ++events_;
        if (cfg_.trace) {
            result_.trace.push_back({events_, static_cast<std::uint32_t>(k), t_hat, dm});
        }
        if (events_ % lag_interval_ == 0) {
            sample_lag(t_hat);
        }
        if (cfg_.progress_interval != 0 && events_ % cfg_.progress_interval == 0) {
            std::clog << "[asyncfv] " << to_string(cfg_.variant) << " events=" << events_ << " t=" << t_hat
                      << " pending=" << queue_.size() << '\n';
        }
        if (events_ > cfg_.max_events) {
            throw_runaway();
        }
    }

    // TwoSum: the rounding error of every transfer is kept per cell so the
    // total is conserved to the final fold
    void add_mass(std::size_t j, double x) {
        double& m = result_.state.mass[j];
        const double sum = m + x;
        const double bp = sum - m;
        comp_[j] += (m - (sum - bp)) + (x - bp);
        m = sum;
    }

    void sample_lag(double now) {
        const auto& ft = result_.state.face_time;
        for (double t : ft) {
            max_lag_ = std::max(max_lag_, std::abs(t - now));
        }
    }

    [[noreturn]] void throw_runaway() const {
        std::vector<std::size_t> idx(last_dt_.size());
        std::iota(idx.begin(), idx.end(), 0);
        const std::size_t n = std::min<std::size_t>(5, idx.size());
        std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n), idx.end(),
                          [&](std::size_t x, std::size_t y) {
                              return result_.state.face_events[x] > result_.state.face_events[y] ||
                                     (result_.state.face_events[x] == result_.state.face_events[y] &&
                                      last_dt_[x] < last_dt_[y]);
                          });
        std::ostringstream msg;
        msg << "event budget of " << cfg_.max_events << " exceeded at t=" << result_.state.system_time
            << "; busiest faces (id: events, last dt):";
        for (std::size_t i = 0; i < n; ++i) {
            msg << ' ' << idx[i] << ": " << result_.state.face_events[idx[i]] << ", " << last_dt_[idx[i]] << ';';
        }
        throw RunawayError(msg.str());
    }

    const Grid& grid_;
    SchemeConfig cfg_;
    bool tracking_;
    bool casc_;
    RunResult result_;
    IndexedMinQueue queue_;
    std::vector<std::size_t> lo_, hi_;
    std::vector<double> a_, b_, flow_;
    std::vector<Kind> kind_;
    std::vector<std::uint8_t> retired_;
    std::vector<double> last_dt_;
    std::vector<double> comp_;
    std::vector<std::size_t> stack_;
    std::uint64_t events_ = 0;
    std::uint64_t lag_interval_ = 65536;
    double max_lag_ = 0.0;
    double initial_mass_ = 0.0;
};

}  // namespace

double projected_update_time(const Grid& grid, const SimState& state, const SchemeConfig& cfg, std::size_t k) {
    const double flow = state.face_flux[k] * grid.face(k).area;
    const double passed = cfg.variant == Variant::Bast ? state.mass_passed[k] : 0.0;
    return project(state.face_time[k], flow, passed, cfg.delta_m, cfg.final_time, cfg.flux_floor).time;
}

double event_mass(const Grid& grid, const SimState& state, const SchemeConfig& cfg, std::size_t k) {
    const double flow = state.face_flux[k] * grid.face(k).area;
    const double passed = cfg.variant == Variant::Bast ? state.mass_passed[k] : 0.0;
    const auto p = project(state.face_time[k], flow, passed, cfg.delta_m, cfg.final_time, cfg.flux_floor);
    if (p.kind != Kind::Sync) {
        return cfg.delta_m;
    }
    const double carried = cfg.variant == Variant::Bas ? 0.0 : state.mass_passed[k];
    return std::abs(carried + flow * (cfg.final_time - state.face_time[k]));
}

void reaction_event_wrap(const Grid& grid, SimState& state, const ReactionTerm& reaction, std::size_t k,
                         double t_hat, double signed_dm) {
    wrap_transfer(grid, state, reaction, k, t_hat, [&](std::size_t lo, std::size_t hi) {
        state.mass[lo] += signed_dm;
        state.mass[hi] -= signed_dm;
    });
}

RunResult run_bas(const Grid& grid, std::span<const double> m0, const SchemeConfig& cfg) {
    if (cfg.variant != Variant::Bas) {
        throw std::invalid_argument("run_bas requires variant BAS");
    }
    return Engine(grid, m0, cfg).run();
}

RunResult run_bast(const Grid& grid, std::span<const double> m0, const SchemeConfig& cfg) {
    if (cfg.variant != Variant::Bast) {
        throw std::invalid_argument("run_bast requires variant BAST");
    }
    return Engine(grid, m0, cfg).run();
}

RunResult run_bas_casc(const Grid& grid, std::span<const double> m0, const SchemeConfig& cfg) {
    if (cfg.variant != Variant::BasCasc) {
        throw std::invalid_argument("run_bas_casc requires variant BAS-casc");
    }
    return Engine(grid, m0, cfg).run();
}

RunResult run_scheme(const Grid& grid, std::span<const double> m0, const SchemeConfig& cfg) {
    return Engine(grid, m0, cfg).run();
}

RunMetrics run_metrics(const Grid& grid, const SimState& state, const SchemeConfig& cfg) {
    RunMetrics m;
    m.n_faces = grid.face_count();
    m.n_events = std::accumulate(state.face_events.begin(), state.face_events.end(), std::uint64_t{0});
    m.n_cascade = state.cascade_events;
    if (m.n_events == 0) {
        m.dt_avg = cfg.final_time;
    } else if (cfg.variant == Variant::Bast) {
        m.dt_avg = state.dt_sum / static_cast<double>(m.n_events);
    } else {
        m.dt_avg = cfg.final_time * static_cast<double>(m.n_faces) / static_cast<double>(m.n_events);
    }
    m.final_mass = std::accumulate(state.mass.begin(), state.mass.end(), 0.0);
    m.initial_mass = m.final_mass;
    m.max_face_lag = state.max_face_lag;
    m.cell_events.assign(grid.cell_count(), 0);
    for (std::size_t j = 0; j < grid.cell_count(); ++j) {
        for (auto k : grid.cell_faces(j)) {
            m.cell_events[j] += state.face_events[k];
        }
    }
    return m;
}

}  // namespace asyncfv
