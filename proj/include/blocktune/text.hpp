#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

// Small string and file helpers shared by the pipeline stages.
namespace blocktune {

std::string_view trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::string to_lower(std::string_view s);

std::optional<int> parse_int(std::string_view s);
std::optional<long long> parse_int64(std::string_view s);
// Accepts "NaN"/"nan" as quiet NaN.
std::optional<double> parse_double(std::string_view s);
// Shortest representation that round-trips; NaN is spelled "NaN".
std::string format_double(double v);

std::string read_file(const std::filesystem::path& p);
void write_file(const std::filesystem::path& p, std::string_view content);
void append_file(const std::filesystem::path& p, std::string_view content);

// FNV-1a, stable across platforms and runs.
std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL);
std::uint64_t mix64(std::uint64_t x);

// Current UTC time as "YYYY-MM-DDTHH:MM:SSZ".
std::string utc_timestamp();

}  // namespace blocktune
