#pragma once

#include <filesystem>
#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace miltag::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

inline constexpr const char* kVersion = "0.1.0";

// Entry point shared by the executable and the tests. args[0] is the program
// name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Parses `key = value` lines ('#' starts a comment) into option/value pairs.
std::vector<std::pair<std::string, std::string>> read_config_file(const std::filesystem::path& path);

// Rewrites `<cmd> ... --config F ...` so that settings from F come first and
// explicit flags override them.
std::vector<std::string> expand_config(const std::vector<std::string>& args);

}  // namespace miltag::cli
