#pragma once

#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <string_view>

namespace asyncfv {

inline constexpr std::string_view kToolVersion = "0.3.0";

/// Shortest decimal that round-trips to the same double.
std::string format_double(double value);

/// FNV-1a, 64 bit.
class Hasher {
public:
    Hasher& bytes(const void* data, std::size_t n);
    Hasher& value(double v) { return bytes(&v, sizeof v); }
    Hasher& value(std::uint64_t v) { return bytes(&v, sizeof v); }
    Hasher& text(std::string_view s) { return bytes(s.data(), s.size()); }
    Hasher& doubles(std::span<const double> v) { return bytes(v.data(), v.size_bytes()); }
    std::uint64_t digest() const { return state_; }

private:
    std::uint64_t state_ = 1469598103934665603ULL;
};

std::string hex64(std::uint64_t v);

/// Opens `path` for writing, creating parent directories; throws on failure.
std::ofstream open_output(const std::string& path);

/// "# asyncfv <version> config_hash=<hex>" plus an optional extra comment line.
std::string comment_header(std::uint64_t config_hash, std::string_view extra = {});

}  // namespace asyncfv
