#include "asyncfv/io.hpp"

#include <array>
#include <charconv>
#include <filesystem>
#include <stdexcept>

namespace asyncfv {

std::string format_double(double value) {
    std::array<char, 32> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    if (ec != std::errc{}) {
        throw std::runtime_error("format_double: conversion failed");
    }
    return std::string(buf.data(), end);
}

Hasher& Hasher::bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        state_ ^= p[i];
        state_ *= 1099511628211ULL;
    }
    return *this;
}

std::string hex64(std::uint64_t v) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = digits[v & 0xF];
        v >>= 4;
    }
    return s;
}

std::ofstream open_output(const std::string& path) {
    std::filesystem::path p(path);
    if (p.has_parent_path()) {
        std::filesystem::create_directories(p.parent_path());
    }
    std::ofstream out(p);
    if (!out) {
        throw std::runtime_error("cannot open output file: " + path);
    }
    return out;
}

std::string comment_header(std::uint64_t config_hash, std::string_view extra) {
    std::string h = "# asyncfv ";
    h += kToolVersion;
    h += " config_hash=";
    h += hex64(config_hash);
    h += '\n';
    if (!extra.empty()) {
        h += "# ";
        h += extra;
        h += '\n';
    }
    return h;
}

}  // namespace asyncfv
