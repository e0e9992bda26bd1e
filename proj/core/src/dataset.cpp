#include "miltag/dataset.hpp"

#include <algorithm>
#include <set>
#include <unordered_set>

#include <json.hpp>

#include "miltag/error.hpp"
#include "text_format.hpp"

namespace miltag {

using nlohmann::json;

std::vector<std::string> Dataset::all_tags() const {
  std::vector<std::string> all = seen_tags;
  all.insert(all.end(), unseen_tags.begin(), unseen_tags.end());
  return all;
}

std::vector<std::size_t> tag_indices(const Bag& bag, const std::vector<std::string>& universe) {
  std::vector<std::size_t> out;
  for (const auto& tag : bag.tags) {
    auto it = std::find(universe.begin(), universe.end(), tag);
    if (it == universe.end()) continue;
    const auto idx = static_cast<std::size_t>(it - universe.begin());
    if (std::find(out.begin(), out.end(), idx) == out.end()) out.push_back(idx);
  }
  std::sort(out.begin(), out.end());
  return out;
}

void validate_dataset(const Dataset& ds, Split split) {
  const std::unordered_set<std::string> seen(ds.seen_tags.begin(), ds.seen_tags.end());
  const std::unordered_set<std::string> unseen(ds.unseen_tags.begin(), ds.unseen_tags.end());
  if (seen.size() != ds.seen_tags.size()) throw DatasetError("seen tag list contains duplicates");
  if (unseen.size() != ds.unseen_tags.size()) {
    throw DatasetError("unseen tag list contains duplicates");
  }
  for (const auto& t : ds.unseen_tags) {
    if (seen.count(t)) throw DatasetError("tag '" + t + "' is listed as both seen and unseen");
  }

  std::unordered_set<std::string> ids;
  for (const auto& bag : ds.bags) {
    if (!ids.insert(bag.id).second) throw DatasetError("duplicate bag id '" + bag.id + "'");
    if (bag.features.cols() < 1) throw ShapeError("bag '" + bag.id + "' has no instances");
    if (bag.feature_dim() != ds.feature_dim) {
      throw ShapeError("bag '" + bag.id + "' has feature dimension " +
                       std::to_string(bag.feature_dim()) + ", expected " +
                       std::to_string(ds.feature_dim));
    }
    if (split == Split::Predict) continue;
    if (split == Split::Train && bag.tags.empty()) {
      throw DatasetError("training bag '" + bag.id + "' has no tags");
    }
    for (const auto& tag : bag.tags) {
      const bool ok = split == Split::Train ? seen.count(tag) != 0
                                            : seen.count(tag) != 0 || unseen.count(tag) != 0;
      if (!ok) {
        throw DatasetError("bag '" + bag.id + "' has tag '" + tag + "' outside the " +
                           (split == Split::Train ? "seen" : "seen+unseen") + " tag set");
      }
    }
  }
}

Bag parse_bag_record(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("invalid bag record: ") + e.what());
  }
  try {
    Bag bag;
    bag.id = j.at("id").get<std::string>();
    const auto rows = j.at("rows").get<std::int64_t>();
    const auto cols = j.at("cols").get<std::int64_t>();
    const auto& data = j.at("data");
    if (rows < 1 || cols < 1) {
      throw ShapeError("bag '" + bag.id + "': declared shape must be positive");
    }
    if (!data.is_array() || data.size() != static_cast<std::size_t>(rows * cols)) {
      throw ShapeError("bag '" + bag.id + "': declared shape " + std::to_string(rows) + "x" +
                       std::to_string(cols) + " needs " + std::to_string(rows * cols) +
                       " values, got " + std::to_string(data.is_array() ? data.size() : 0));
    }
    bag.features.resize(rows, cols);
    // Column-major on disk, same as Eigen's default storage.
    for (std::size_t k = 0; k < data.size(); ++k) {
      bag.features.data()[k] = data[k].get<double>();
    }
    for (const auto& t : j.at("tags")) {
      auto tag = std::string(detail::trim(t.get<std::string>()));
      if (std::find(bag.tags.begin(), bag.tags.end(), tag) == bag.tags.end()) {
        bag.tags.push_back(std::move(tag));
      }
    }
    return bag;
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid bag record: ") + e.what());
  }
}

std::string format_bag_record(const Bag& bag) {
  json j;
  j["id"] = bag.id;
  j["rows"] = bag.features.rows();
  j["cols"] = bag.features.cols();
  j["data"] = std::vector<double>(bag.features.data(), bag.features.data() + bag.features.size());
  j["tags"] = bag.tags;
  return j.dump();
}

std::vector<Bag> load_bags(const std::filesystem::path& bags_path) {
  const auto text = detail::read_file(bags_path);
  std::vector<Bag> bags;
  std::string_view rest = text;
  std::size_t line_no = 0;
  while (!rest.empty()) {
    const auto nl = rest.find('\n');
    const auto line = detail::trim(rest.substr(0, nl));
    rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
    ++line_no;
    if (line.empty()) continue;
    try {
      bags.push_back(parse_bag_record(line));
    } catch (const ShapeError& e) {
      throw ShapeError(bags_path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const ParseError& e) {
      throw ParseError(bags_path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return bags;
}

Dataset load_dataset(const std::filesystem::path& bags_path,
                     const std::filesystem::path& seen_path,
                     const std::filesystem::path& unseen_path, Split split) {
  Dataset ds;
  ds.bags = load_bags(bags_path);
  if (ds.bags.empty()) throw DatasetError(bags_path.string() + ": no bag records");
  ds.seen_tags = load_tag_list(seen_path);
  if (!unseen_path.empty()) ds.unseen_tags = load_tag_list(unseen_path);
  ds.feature_dim = ds.bags.front().feature_dim();
  validate_dataset(ds, split);
  return ds;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& bags_path,
                  const std::filesystem::path& seen_path,
                  const std::filesystem::path& unseen_path) {
  if (ds.bags.empty()) throw DatasetError("refusing to save a dataset with no bags");
  std::string out;
  for (const auto& bag : ds.bags) {
    out += format_bag_record(bag);
    out += '\n';
  }
  detail::write_file(bags_path, out);
  save_tag_list(ds.seen_tags, seen_path);
  save_tag_list(ds.unseen_tags, unseen_path);
}

std::vector<Bag> limit_instances(std::vector<Bag> bags, std::size_t max_instances) {
  if (max_instances == 0) throw ConfigError("bag size must be positive");
  for (auto& bag : bags) {
    if (bag.instance_count() > max_instances) {
      bag.features = bag.features.leftCols(static_cast<Eigen::Index>(max_instances)).eval();
    }
  }
  return bags;
}

}  // namespace miltag
