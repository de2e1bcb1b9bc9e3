#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "asyncfv/harness.hpp"
#include "asyncfv/schemes.hpp"

namespace asyncfv {

/// Parse or validation failure. `field` is "section.key" when one applies.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field, int line, const std::string& message);

    const std::string& field() const { return field_; }
    int line() const { return line_; }

private:
    std::string field_;
    int line_;
};

struct RunConfig {
    ExperimentSpec experiment;
    Scale scale = Scale::Desk;
    Variant variant = Variant::Bas;
    double delta_m = 1e-6;
    double cascade_threshold = 0.0;
    bool trace = false;
    std::string out_dir = "out";
    int verbosity = 0;
    /// Source text exactly as read.
    std::string echo;
    std::uint64_t hash = 0;

    SchemeConfig scheme() const;
};

/// Sections and keys:
///   [experiment] name scale nx ny nz lx ly lz diffusivity vx vy vz initial
///                source_x source_y source_z source_value fracture fracture_d matrix_d seed
///                reaction final_time reference_tol reference_method
///   [scheme]     variant delta_m schemes ladder cascade_threshold max_events trace
///   [output]     dir verbosity
/// Keys left out keep the defaults of the named experiment at the chosen scale.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

}  // namespace asyncfv
