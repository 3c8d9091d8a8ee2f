#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace bwm {

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view contents);

// Shortest decimal form that parses back to the same double.
std::string format_double(double value);
double parse_double(std::string_view token);
long long parse_int(std::string_view token);

std::string_view trim(std::string_view s);
std::vector<std::string_view> split(std::string_view s, char sep);

}  // namespace bwm
