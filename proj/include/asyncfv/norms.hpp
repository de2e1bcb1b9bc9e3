#pragma once

#include <cmath>
#include <span>
#include <stdexcept>

namespace asyncfv {

/// ||c - c_ref||_2 / sqrt(J).
inline double discrete_l2_error(std::span<const double> c, std::span<const double> c_ref) {
    if (c.size() != c_ref.size()) {
        throw std::invalid_argument("discrete_l2_error: length mismatch");
    }
    if (c.empty()) {
        return 0.0;
    }
    double s = 0.0;
    for (std::size_t j = 0; j < c.size(); ++j) {
        const double d = c[j] - c_ref[j];
        s += d * d;
    }
    return std::sqrt(s / static_cast<double>(c.size()));
}

}  // namespace asyncfv
