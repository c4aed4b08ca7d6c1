#pragma once

// Round-trip decimal formatting shared by the cache, CSV and JSON writers.

#include "kml/error.hpp"

#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>
#include <system_error>

namespace kml {

/// Shortest decimal string that parses back to exactly the same double.
inline std::string to_decimal(double x)
{
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
    if (ec != std::errc()) throw error("to_decimal: formatting failed");
    return std::string(buf, end);
}

/// Strict decimal parse: the whole token must be consumed.
inline double parse_decimal(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
        throw invalid_argument("not a decimal number: '" + std::string(s) + "'");
    return v;
}

inline std::string to_hex(std::uint64_t x)
{
    char buf[17];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x, 16);
    (void)ec;
    std::string s(buf, end);
    return std::string(16 - s.size(), '0') + s;
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view data)
{
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : data) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return h;
}

} // namespace kml
