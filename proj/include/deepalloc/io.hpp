#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace deepalloc::io {

/// Writes through a sibling temp file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

/// Shortest decimal text that parses back to the same double.
std::string format_number(double value);

std::vector<std::string> split(std::string_view line, char sep);
std::string_view trim(std::string_view s);
double parse_double(std::string_view cell);

}  // namespace deepalloc::io
