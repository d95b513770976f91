#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace favheat::textio {

/// Shortest representation that parses back to the same double.
std::string format_double(double v);

/// Strict full-token parse; nullopt on any trailing garbage.
std::optional<double> parse_double(std::string_view token);
std::optional<long long> parse_int(std::string_view token);

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

}  // namespace favheat::textio
