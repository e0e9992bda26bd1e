#include <fstream>

#include "commands.hpp"
#include "miltag/error.hpp"

namespace miltag::cli {

namespace {

std::string trimmed(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

std::vector<std::pair<std::string, std::string>> read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config: cannot open " + path.string());
  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trimmed(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("--config: " + path.string() + ":" + std::to_string(line_no) +
                        ": expected key = value");
    }
    auto key = trimmed(line.substr(0, eq));
    auto value = trimmed(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("--config: " + path.string() + ":" + std::to_string(line_no) + ": empty key");
    }
    for (auto& c : key) {
      if (c == '_') c = '-';
    }
    entries.emplace_back(std::move(key), std::move(value));
  }
  return entries;
}

std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::vector<std::string> head, rest;
  std::string config;
  // args: program, subcommand, options...
  for (std::size_t i = 0; i < args.size(); ++i) {
    const auto& a = args[i];
    if (a == "--config" && i + 1 < args.size()) {
      config = args[++i];
    } else if (a.rfind("--config=", 0) == 0) {
      config = a.substr(9);
    } else if (i < 2) {
      head.push_back(a);
    } else {
      rest.push_back(a);
    }
  }
  if (config.empty()) return args;
  for (const auto& [key, value] : read_config_file(config)) {
    head.push_back("--" + key + "=" + value);
  }
  head.insert(head.end(), rest.begin(), rest.end());
  return head;
}

}  // namespace miltag::cli
