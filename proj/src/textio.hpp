#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace turbperf {

// Shortest decimal form that round-trips an IEEE double ("%.17g").
std::string format_double(double v);

// Strict double parse; the whole token must be consumed.
std::optional<double> parse_double(const std::string& token);
std::optional<long long> parse_int(const std::string& token);

std::string trim(const std::string& s);
std::vector<std::string> split(const std::string& line, char delim);
std::string lower(std::string s);

// FNV-1a 64-bit.
std::uint64_t fnv1a(const std::string& data);
std::uint64_t fnv1a_file(const std::string& path); // throws IoError
std::string hex64(std::uint64_t v);

std::string read_file(const std::string& path); // throws IoError
bool file_exists(const std::string& path);

// Writes to <path>.tmp then renames, so a failed write leaves no partial file.
void write_file_atomic(const std::string& path, const std::string& content);

} // namespace turbperf
