#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace breathms::text {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

/// Fixed-point formatting used by human-readable tables.
std::string format_fixed(double value, int digits);

std::optional<double> parse_double(std::string_view text);
std::optional<long long> parse_int(std::string_view text);

std::vector<std::string_view> split(std::string_view line, char delimiter);
std::string_view trim(std::string_view text);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace breathms::text
