#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "miltag/dataset.hpp"
#include "miltag/model.hpp"

namespace miltag {

struct LossValue {
  double value = 0.0;
  std::size_t num_pairs = 0;  // |positives| * |negatives|
};

// log(1 + exp(x)) without overflow.
double softplus(double x);
double logistic(double x);

// Mean over (positive, negative) pairs of softplus(o_neg - o_pos).
// `positives` are indices into `scores`; every other index is a negative.
// Throws DegenerateBagError when there is no positive or no negative.
LossValue tag_loss(const Eigen::VectorXd& scores, std::span<const std::size_t> positives);

// d tag_loss / d scores.
Eigen::VectorXd tag_loss_gradient(const Eigen::VectorXd& scores,
                                  std::span<const std::size_t> positives);

struct DatasetLoss {
  double value = 0.0;
  std::size_t evaluated = 0;
  std::size_t skipped = 0;  // degenerate bags
};

// Unweighted mean of per-bag tag_loss over non-degenerate bags. Bag tags are
// resolved against params.semantic.tags().
DatasetLoss dataset_loss(const ModelParams& params, std::span<const Bag> bags);

// Backpropagates an upstream gradient on the bag scores through pooling, the
// frozen projection, and both FC layers. ReLU passes no gradient where the
// pre-activation is exactly zero.
Gradients backward_from_scores(const ModelParams& params, const ForwardTrace& trace,
                               const Eigen::VectorXd& score_grad);

Gradients backward(const ModelParams& params, const ForwardTrace& trace,
                   std::span<const std::size_t> positives);

// Central differences of tag_loss(forward(params, bag)) for every trainable
// scalar.
Gradients finite_diff_grad(const ModelParams& params, const Eigen::MatrixXd& features,
                           std::span<const std::size_t> positives, double h);

// max over entries of |a - b| / max(|a|, |b|, floor).
double max_relative_error(const Gradients& analytic, const Gradients& numeric,
                          double floor = 1e-6);

struct GradCheckOptions {
  std::size_t trials = 100;
  std::uint64_t seed = 13;
  std::vector<Pooling> poolings{Pooling::Mean, Pooling::Max};
  double step = 1e-5;
  double tolerance = 1e-4;
  // When false, configurations whose ReLU pre-activations or max-pool
  // choices sit within `tie_margin` of a kink are resampled. When true, every
  // bag gets a zero instance and zero biases, which parks it exactly on the
  // ReLU kink.
  bool allow_ties = false;
  double tie_margin = 1e-3;
};

struct GradCheckTrial {
  std::uint64_t seed = 0;
  Pooling pooling = Pooling::Mean;
  std::size_t D = 0, H = 0, d = 0, S = 0, instances = 0;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckTrial> trials;
  double max_rel_error = 0.0;
  std::size_t worst = 0;  // index into trials
  bool passed = false;
};

// Random configurations with D<=8, H<=8, d<=4, S<=5, n+1<=4.
GradCheckReport run_gradient_check(const GradCheckOptions& options);

}  // namespace miltag
