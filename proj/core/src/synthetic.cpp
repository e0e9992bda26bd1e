#include <cmath>
#include <cstdio>

#include <Eigen/QR>

#include "miltag/dataset.hpp"
#include "miltag/error.hpp"
#include "miltag/rng.hpp"

namespace miltag {

namespace {

constexpr int kDistractorAttempts = 1000;

std::string indexed_name(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%02zu", prefix, i);
  return buf;
}

Eigen::VectorXd gaussian_vector(Rng& rng, std::size_t n) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.normal();
  return v;
}

Eigen::VectorXd random_unit(Rng& rng, std::size_t n) {
  for (;;) {
    Eigen::VectorXd v = gaussian_vector(rng, n);
    const double norm = v.norm();
    if (norm > 1e-12) return v / norm;
  }
}

// rows x cols matrix with orthonormal columns (thin Q of a Gaussian matrix).
Eigen::MatrixXd orthonormal_columns(Rng& rng, std::size_t rows, std::size_t cols) {
  Eigen::MatrixXd gaussian(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index c = 0; c < gaussian.cols(); ++c) {
    for (Eigen::Index r = 0; r < gaussian.rows(); ++r) gaussian(r, c) = rng.normal();
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(gaussian);
  return qr.householderQ() * Eigen::MatrixXd::Identity(gaussian.rows(), gaussian.cols());
}

// k distinct draws from `pool`, in draw order.
std::vector<std::size_t> sample_without_replacement(Rng& rng, std::vector<std::size_t> pool,
                                                    std::size_t k) {
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

struct Generator {
  const SynthConfig& cfg;
  Rng rng;
  Eigen::MatrixXd vocab;  // d x (S+U)
  Eigen::MatrixXd mixing;
  std::vector<std::string> names;

  Eigen::VectorXd noise() {
    Eigen::VectorXd e = gaussian_vector(rng, cfg.feature_dim);
    return e * cfg.noise_sigma;
  }

  Eigen::VectorXd distractor_direction() {
    for (int attempt = 0; attempt < kDistractorAttempts; ++attempt) {
      Eigen::VectorXd r = random_unit(rng, cfg.embed_dim);
      if ((vocab.transpose() * r).maxCoeff() < cfg.distractor_max_cosine) return r;
    }
    throw ConfigError("distractor_max_cosine: no distractor direction found after " +
                      std::to_string(kDistractorAttempts) + " attempts");
  }

  Bag make_bag(std::string id, const std::vector<std::size_t>& vocabulary,
               Range<std::size_t> tag_count) {
    const auto k = static_cast<std::size_t>(
        rng.between(static_cast<std::int64_t>(tag_count.min),
                    static_cast<std::int64_t>(std::min(tag_count.max, vocabulary.size()))));
    const auto tags = sample_without_replacement(rng, vocabulary, k);

    const std::size_t free_slots = cfg.bag_size - 1 - k;
    const auto distractors = std::min<std::size_t>(
        free_slots, static_cast<std::size_t>(rng.between(
                        static_cast<std::int64_t>(cfg.distractors_per_bag.min),
                        static_cast<std::int64_t>(cfg.distractors_per_bag.max))));

    std::vector<Eigen::VectorXd> instances;
    instances.reserve(cfg.bag_size - 1);
    Eigen::VectorXd tag_sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cfg.feature_dim));
    for (auto t : tags) {
      Eigen::VectorXd clean = mixing * vocab.col(static_cast<Eigen::Index>(t));
      tag_sum += clean;
      instances.push_back(clean + noise());
    }
    for (std::size_t i = 0; i < distractors; ++i) {
      instances.push_back(mixing * distractor_direction() + noise());
    }
    // Remaining proposals are extra views of the image's objects.
    while (instances.size() < cfg.bag_size - 1) {
      const auto t = tags[static_cast<std::size_t>(rng.below(tags.size()))];
      instances.push_back(mixing * vocab.col(static_cast<Eigen::Index>(t)) + noise());
    }
    rng.shuffle(instances);

    Bag bag;
    bag.id = std::move(id);
    bag.features.resize(static_cast<Eigen::Index>(cfg.feature_dim),
                        static_cast<Eigen::Index>(cfg.bag_size));
    bag.features.col(0) = tag_sum / static_cast<double>(k) + noise();
    for (std::size_t i = 0; i < instances.size(); ++i) {
      bag.features.col(static_cast<Eigen::Index>(i + 1)) = instances[i];
    }

    std::vector<std::size_t> labels = tags;
    if (cfg.label_noise_rate > 0.0 && rng.bernoulli(cfg.label_noise_rate)) {
      const auto victim = static_cast<std::size_t>(rng.below(labels.size()));
      const bool can_delete = labels.size() > 1;
      if (can_delete && rng.bernoulli(0.5)) {
        labels.erase(labels.begin() + static_cast<std::ptrdiff_t>(victim));
      } else {
        std::vector<std::size_t> others;
        for (auto v : vocabulary) {
          if (std::find(labels.begin(), labels.end(), v) == labels.end()) others.push_back(v);
        }
        if (!others.empty()) labels[victim] = others[static_cast<std::size_t>(rng.below(others.size()))];
      }
    }
    for (auto t : labels) bag.tags.push_back(names[t]);
    return bag;
  }
};

}  // namespace

void validate(const SynthConfig& cfg) {
  auto fail = [](const std::string& field, const std::string& why) {
    throw ConfigError(field + ": " + why);
  };
  if (cfg.num_seen < 2) fail("num_seen", "need at least 2 seen tags");
  if (cfg.num_unseen < 1) fail("num_unseen", "must be positive");
  if (cfg.embed_dim < 1) fail("embed_dim", "must be positive");
  if (cfg.feature_dim < cfg.embed_dim) fail("feature_dim", "must be >= embed_dim");
  if (!(cfg.semantic_residual >= 0.0)) fail("semantic_residual", "must be nonnegative");
  if (cfg.bag_size < 2) fail("bag_size", "must be >= 2");
  if (cfg.tags_per_image.min < 1 || cfg.tags_per_image.min > cfg.tags_per_image.max) {
    fail("tags_per_image", "need 1 <= min <= max");
  }
  if (cfg.tags_per_image.max >= cfg.num_seen) {
    fail("tags_per_image", "max must be below num_seen so training bags keep a negative tag");
  }
  if (cfg.tags_per_image.max > cfg.bag_size - 1) {
    fail("tags_per_image", "max exceeds the number of non-global instances (bag_size - 1)");
  }
  if (cfg.test_tags_per_image.min < 1 ||
      cfg.test_tags_per_image.min > cfg.test_tags_per_image.max) {
    fail("test_tags_per_image", "need 1 <= min <= max");
  }
  if (cfg.test_tags_per_image.max > cfg.bag_size - 1) {
    fail("test_tags_per_image", "max exceeds the number of non-global instances (bag_size - 1)");
  }
  if (!cfg.test_includes_seen && cfg.test_tags_per_image.min > cfg.num_unseen) {
    fail("test_tags_per_image", "min exceeds the unseen vocabulary");
  }
  if (cfg.distractors_per_bag.min > cfg.distractors_per_bag.max) {
    fail("distractors_per_bag", "need min <= max");
  }
  if (!(cfg.noise_sigma >= 0.0)) fail("noise_sigma", "must be nonnegative");
  if (!(cfg.label_noise_rate >= 0.0 && cfg.label_noise_rate <= 1.0)) {
    fail("label_noise_rate", "must be a probability");
  }
  if (!(cfg.distractor_max_cosine > -1.0 && cfg.distractor_max_cosine <= 1.0)) {
    fail("distractor_max_cosine", "must be in (-1, 1]");
  }
  if (cfg.train_size < 1) fail("train_size", "must be positive");
  if (cfg.test_size < 1) fail("test_size", "must be positive");
}

SyntheticData generate_synthetic(const SynthConfig& cfg) {
  validate(cfg);
  const std::size_t total = cfg.num_seen + cfg.num_unseen;

  Generator gen{cfg, Rng(cfg.seed), {}, {}, {}};
  const auto d = static_cast<Eigen::Index>(cfg.embed_dim);
  const bool low_rank = cfg.semantic_rank > 0 && cfg.semantic_rank < cfg.embed_dim;
  Eigen::MatrixXd basis;
  if (low_rank) basis = orthonormal_columns(gen.rng, cfg.embed_dim, cfg.semantic_rank);
  gen.vocab.resize(d, static_cast<Eigen::Index>(total));
  for (std::size_t t = 0; t < total; ++t) {
    if (low_rank) {
      Eigen::VectorXd v;
      do {
        const Eigen::VectorXd z = gaussian_vector(gen.rng, cfg.semantic_rank) /
                                  std::sqrt(static_cast<double>(cfg.semantic_rank));
        const Eigen::VectorXd xi = gaussian_vector(gen.rng, cfg.embed_dim) /
                                   std::sqrt(static_cast<double>(cfg.embed_dim));
        v = basis * z + cfg.semantic_residual * xi;
      } while (v.norm() < 1e-12);
      gen.vocab.col(static_cast<Eigen::Index>(t)) = v.normalized();
    } else {
      gen.vocab.col(static_cast<Eigen::Index>(t)) = random_unit(gen.rng, cfg.embed_dim);
    }
    gen.names.push_back(t < cfg.num_seen ? indexed_name("seen", t)
                                         : indexed_name("unseen", t - cfg.num_seen));
  }

  gen.mixing = orthonormal_columns(gen.rng, cfg.feature_dim, cfg.embed_dim);

  SyntheticData out;
  out.mixing = gen.mixing;
  out.table = EmbeddingTable(cfg.embed_dim);
  for (std::size_t t = 0; t < total; ++t) {
    out.table.set(gen.names[t], gen.vocab.col(static_cast<Eigen::Index>(t)));
  }

  std::vector<std::size_t> seen_vocab, test_vocab;
  for (std::size_t t = 0; t < total; ++t) {
    if (t < cfg.num_seen) seen_vocab.push_back(t);
    if (t >= cfg.num_seen || cfg.test_includes_seen) test_vocab.push_back(t);
  }

  for (auto* ds : {&out.train, &out.test}) {
    ds->seen_tags.assign(gen.names.begin(), gen.names.begin() + static_cast<std::ptrdiff_t>(cfg.num_seen));
    ds->unseen_tags.assign(gen.names.begin() + static_cast<std::ptrdiff_t>(cfg.num_seen), gen.names.end());
    ds->feature_dim = cfg.feature_dim;
  }
  char id[32];
  for (std::size_t i = 0; i < cfg.train_size; ++i) {
    std::snprintf(id, sizeof id, "train_%06zu", i);
    out.train.bags.push_back(gen.make_bag(id, seen_vocab, cfg.tags_per_image));
  }
  for (std::size_t i = 0; i < cfg.test_size; ++i) {
    std::snprintf(id, sizeof id, "test_%06zu", i);
    out.test.bags.push_back(gen.make_bag(id, test_vocab, cfg.test_tags_per_image));
  }
  return out;
}

}  // namespace miltag
