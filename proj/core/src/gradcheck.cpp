#include <algorithm>
#include <cmath>

#include "miltag/error.hpp"
#include "miltag/loss.hpp"
#include "miltag/rng.hpp"

namespace miltag {

namespace {

struct Case {
  ModelParams params;
  Eigen::MatrixXd features;
  std::vector<std::size_t> positives;
};

Eigen::MatrixXd uniform_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = rng.uniform(-scale, scale);
  return m;
}

Case sample_case(Rng& rng, Pooling pooling) {
  const auto D = static_cast<Eigen::Index>(rng.between(1, 8));
  const auto H = static_cast<Eigen::Index>(rng.between(1, 8));
  const auto d = static_cast<Eigen::Index>(rng.between(1, 4));
  const auto S = static_cast<Eigen::Index>(rng.between(2, 5));
  const auto N = static_cast<Eigen::Index>(rng.between(1, 4));

  Case c;
  c.params.pooling = pooling;
  c.params.head.W1 = uniform_matrix(rng, H, D, 1.0);
  c.params.head.b1 = uniform_matrix(rng, H, 1, 0.5);
  c.params.head.W2 = uniform_matrix(rng, d, H, 1.0);
  c.params.head.b2 = uniform_matrix(rng, d, 1, 0.5);

  Eigen::MatrixXd semantic(d, S);
  std::vector<std::string> names;
  for (Eigen::Index t = 0; t < S; ++t) {
    Eigen::VectorXd v(d);
    do {
      for (auto& x : v) x = rng.normal();
    } while (v.norm() < 1e-6);
    semantic.col(t) = v.normalized();
    names.push_back("t" + std::to_string(t));
  }
  c.params.semantic = SemanticMatrix(std::move(names), std::move(semantic));

  c.features.resize(D, N);
  for (Eigen::Index k = 0; k < c.features.size(); ++k) c.features.data()[k] = rng.normal();

  // Random nonempty proper subset of [0, S).
  const auto k = static_cast<std::size_t>(rng.between(1, S - 1));
  std::vector<std::size_t> all(static_cast<std::size_t>(S));
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  rng.shuffle(all);
  c.positives.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(c.positives.begin(), c.positives.end());
  return c;
}

// Whether every ReLU input and every max-pool decision is at least `margin`
// away from its switching point.
bool tie_free(const Case& c, double margin) {
  const auto tr = forward(c.params, c.features);
  if ((tr.pre_activation1.array().abs() < margin).any()) return false;
  if (c.params.pooling == Pooling::Max && tr.instance_scores.cols() > 1) {
    for (Eigen::Index t = 0; t < tr.instance_scores.rows(); ++t) {
      const auto best = tr.argmax_instance[static_cast<std::size_t>(t)];
      for (Eigen::Index i = 0; i < tr.instance_scores.cols(); ++i) {
        if (i != best && tr.bag_scores[t] - tr.instance_scores(t, i) < margin) return false;
      }
    }
  }
  return true;
}

}  // namespace

GradCheckReport run_gradient_check(const GradCheckOptions& options) {
  if (options.trials == 0) throw ConfigError("trials must be positive");
  if (options.poolings.empty()) throw ConfigError("at least one pooling mode is required");
  GradCheckReport report;
  for (std::size_t i = 0; i < options.trials; ++i) {
    GradCheckTrial trial;
    trial.seed = options.seed + i;
    trial.pooling = options.poolings[i % options.poolings.size()];
    Rng rng(trial.seed);

    Case c = sample_case(rng, trial.pooling);
    if (options.allow_ties) {
      c.features.col(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(c.features.cols())))).setZero();
      c.params.head.b1.setZero();
      c.params.head.b2.setZero();
    } else {
      int attempts = 0;
      while (!tie_free(c, options.tie_margin)) {
        if (++attempts > 10000) throw Error("could not sample a tie-free gradient-check case");
        c = sample_case(rng, trial.pooling);
      }
    }

    const auto trace = forward(c.params, c.features);
    const auto analytic = backward(c.params, trace, c.positives);
    const auto numeric = finite_diff_grad(c.params, c.features, c.positives, options.step);
    trial.max_rel_error = max_relative_error(analytic, numeric);
    trial.D = c.params.input_dim();
    trial.H = c.params.hidden_dim();
    trial.d = c.params.embed_dim();
    trial.S = c.params.tag_count();
    trial.instances = static_cast<std::size_t>(c.features.cols());

    if (report.trials.empty() || !(trial.max_rel_error <= report.max_rel_error)) {
      report.max_rel_error = trial.max_rel_error;
      report.worst = report.trials.size();
    }
    report.trials.push_back(trial);
  }
  report.passed = report.max_rel_error < options.tolerance;
  return report;
}

}  // namespace miltag
