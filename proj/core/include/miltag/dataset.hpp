#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "miltag/embeddings.hpp"

namespace miltag {

// One image: a D x (n+1) instance feature matrix where column 0 is the
// whole-image instance, plus its ground-truth tags.
struct Bag {
  std::string id;
  Eigen::MatrixXd features;
  std::vector<std::string> tags;

  std::size_t feature_dim() const noexcept { return static_cast<std::size_t>(features.rows()); }
  std::size_t instance_count() const noexcept { return static_cast<std::size_t>(features.cols()); }

  friend bool operator==(const Bag& a, const Bag& b) {
    return a.id == b.id && a.tags == b.tags && a.features.rows() == b.features.rows() &&
           a.features.cols() == b.features.cols() && a.features == b.features;
  }
};

// Which tag-closure rule applies when a dataset is loaded.
//   Train   - tags must be nonempty and drawn from the seen list.
//   Test    - tags must come from seen or unseen lists; empty tag sets allowed.
//   Predict - tags are not checked at all (ground truth optional).
enum class Split { Train, Test, Predict };

struct Dataset {
  std::vector<Bag> bags;
  std::vector<std::string> seen_tags;
  std::vector<std::string> unseen_tags;
  std::size_t feature_dim = 0;

  std::size_t seen_count() const noexcept { return seen_tags.size(); }
  std::size_t unseen_count() const noexcept { return unseen_tags.size(); }
  // Seen tags then unseen tags; index order matches the extended semantic matrix.
  std::vector<std::string> all_tags() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Throws DatasetError/ShapeError when an invariant does not hold.
void validate_dataset(const Dataset& ds, Split split);

// Maps each bag tag to its index in `universe`. Unknown tags are dropped.
std::vector<std::size_t> tag_indices(const Bag& bag, const std::vector<std::string>& universe);

Dataset load_dataset(const std::filesystem::path& bags_path,
                     const std::filesystem::path& seen_path,
                     const std::filesystem::path& unseen_path,
                     Split split = Split::Train);
// Bag records only, as used for prediction inputs.
std::vector<Bag> load_bags(const std::filesystem::path& bags_path);
Bag parse_bag_record(std::string_view line);
std::string format_bag_record(const Bag& bag);

void save_dataset(const Dataset& ds, const std::filesystem::path& bags_path,
                  const std::filesystem::path& seen_path,
                  const std::filesystem::path& unseen_path);

// Keeps the first `max_instances` columns of every bag (the whole-image
// instance plus the leading proposals). Bags that are already small enough are
// unchanged.
std::vector<Bag> limit_instances(std::vector<Bag> bags, std::size_t max_instances);

template <typename T>
struct Range {
  T min;
  T max;
  friend bool operator==(const Range&, const Range&) = default;
};

struct SynthConfig {
  std::size_t num_seen = 10;
  std::size_t num_unseen = 5;
  std::size_t embed_dim = 16;
  std::size_t feature_dim = 32;
  // Tag vectors are drawn as normalize(B z + semantic_residual * xi) with B a
  // random d x semantic_rank orthonormal basis, so related tags share
  // directions. semantic_rank = 0 (or >= embed_dim) gives isotropic vectors.
  std::size_t semantic_rank = 8;
  double semantic_residual = 0.2;
  std::size_t bag_size = 8;  // n + 1, including the whole-image instance
  Range<std::size_t> tags_per_image{1, 3};       // training images
  Range<std::size_t> test_tags_per_image{1, 1};  // test images
  Range<std::size_t> distractors_per_bag{0, 2};
  double noise_sigma = 0.3;
  double label_noise_rate = 0.0;
  double distractor_max_cosine = 0.3;
  std::size_t train_size = 200;
  std::size_t test_size = 500;
  // When true, test images draw tags from seen and unseen tags; otherwise
  // only from unseen tags.
  bool test_includes_seen = false;
  std::uint64_t seed = 7;

  friend bool operator==(const SynthConfig&, const SynthConfig&) = default;
};

// Throws ConfigError naming the offending field.
void validate(const SynthConfig& cfg);

struct SyntheticData {
  Dataset train;
  Dataset test;
  EmbeddingTable table;    // unit-norm tag vectors, seen tags first
  Eigen::MatrixXd mixing;  // D x d, orthonormal columns
};

// Deterministic in cfg (see README for the construction).
SyntheticData generate_synthetic(const SynthConfig& cfg);

}  // namespace miltag
