#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace ff::io {

/// Shortest decimal text that parses back to the identical double.
std::string format_double(double value);
/// Parses a full token as a double; returns false on trailing junk or empty input.
bool parse_double(std::string_view token, double& out);

std::string read_text(const std::filesystem::path& path);
/// Writes to a sibling temporary file and renames it into place.
void write_text_atomic(const std::filesystem::path& path, std::string_view content);

std::vector<std::string_view> split(std::string_view line, char sep);
std::string_view trim(std::string_view s);

/// Writes a CSV with a header row and one row per matrix row.
void write_table_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
                     const std::vector<std::vector<double>>& columns);

}  // namespace ff::io
