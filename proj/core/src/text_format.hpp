#pragma once

// Internal helpers shared by the text readers and writers.

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace miltag::detail {

// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);
std::optional<double> parse_double(std::string_view text);

std::string read_file(const std::filesystem::path& path);
// Writes via a temporary sibling and renames it into place.
void write_file(const std::filesystem::path& path, std::string_view contents);

std::string_view trim(std::string_view text);
std::vector<std::string_view> split_whitespace(std::string_view line);

}  // namespace miltag::detail
