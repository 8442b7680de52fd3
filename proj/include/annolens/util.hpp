#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace annolens {

/// Shortest decimal form that round-trips to the same double.
std::string format_number(double value);

/// Strict parse of a full string as a finite double; throws DataError.
double parse_number(std::string_view text, std::string_view context);

std::string_view trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);

/// Splits on any of `delimiters`, trimming parts and dropping empty ones.
std::vector<std::string> split_any(std::string_view s, std::string_view delimiters);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t value);

/// Engine seeded deterministically from a user seed and a stream id
/// (e.g. chain index or simulation index).
std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream);

}  // namespace annolens
