#pragma once

// Small text helpers shared by the key-value config, dataset, and CSV writers.

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tpt::text {

// Shortest representation that round-trips exactly.
std::string format_double(double v);
// Fixed-point with `digits` decimals.
std::string format_fixed(double v, int digits);

std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
// "key=value" -> {key, value}; ConfigError if '=' is missing.
std::pair<std::string, std::string> split_kv(std::string_view s);

double parse_double(std::string_view s, std::string_view what);
std::size_t parse_size(std::string_view s, std::string_view what);
std::uint64_t parse_u64(std::string_view s, std::string_view what);
bool parse_bool(std::string_view s, std::string_view what);

// 64-bit FNV-1a, stable across builds; used for config hashes.
std::uint64_t fnv1a(std::string_view s);
std::string hex64(std::uint64_t v);

}  // namespace tpt::text
