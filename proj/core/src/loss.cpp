#include "miltag/loss.hpp"

#include <algorithm>
#include <cmath>

#include "miltag/error.hpp"

namespace miltag {

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace {

// Membership mask over the score vector, validated.
std::vector<char> positive_mask(Eigen::Index size, std::span<const std::size_t> positives) {
  std::vector<char> mask(static_cast<std::size_t>(size), 0);
  std::size_t count = 0;
  for (auto p : positives) {
    if (p >= mask.size()) {
      throw ShapeError("positive tag index " + std::to_string(p) + " outside " +
                       std::to_string(size) + " scores");
    }
    if (!mask[p]) ++count;
    mask[p] = 1;
  }
  if (count == 0) throw DegenerateBagError("bag has no positive tags");
  if (count == mask.size()) throw DegenerateBagError("bag has no negative tags");
  return mask;
}

}  // namespace

LossValue tag_loss(const Eigen::VectorXd& scores, std::span<const std::size_t> positives) {
  const auto mask = positive_mask(scores.size(), positives);
  double sum = 0.0;
  std::size_t pairs = 0;
  for (Eigen::Index neg = 0; neg < scores.size(); ++neg) {
    if (mask[static_cast<std::size_t>(neg)]) continue;
    for (Eigen::Index pos = 0; pos < scores.size(); ++pos) {
      if (!mask[static_cast<std::size_t>(pos)]) continue;
      sum += softplus(scores[neg] - scores[pos]);
      ++pairs;
    }
  }
  return {sum / static_cast<double>(pairs), pairs};
}

Eigen::VectorXd tag_loss_gradient(const Eigen::VectorXd& scores,
                                  std::span<const std::size_t> positives) {
  const auto mask = positive_mask(scores.size(), positives);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(scores.size());
  std::size_t pairs = 0;
  for (Eigen::Index neg = 0; neg < scores.size(); ++neg) {
    if (mask[static_cast<std::size_t>(neg)]) continue;
    for (Eigen::Index pos = 0; pos < scores.size(); ++pos) {
      if (!mask[static_cast<std::size_t>(pos)]) continue;
      const double w = logistic(scores[neg] - scores[pos]);
      grad[neg] += w;
      grad[pos] -= w;
      ++pairs;
    }
  }
  return grad / static_cast<double>(pairs);
}

DatasetLoss dataset_loss(const ModelParams& params, std::span<const Bag> bags) {
  DatasetLoss out;
  double sum = 0.0;
  for (const auto& bag : bags) {
    const auto positives = tag_indices(bag, params.semantic.tags());
    const auto trace = forward(params, bag);
    try {
      sum += tag_loss(trace.bag_scores, positives).value;
      ++out.evaluated;
    } catch (const DegenerateBagError&) {
      ++out.skipped;
    }
  }
  if (out.evaluated == 0) throw DegenerateBagError("every bag is degenerate; loss is undefined");
  out.value = sum / static_cast<double>(out.evaluated);
  return out;
}

Gradients backward_from_scores(const ModelParams& params, const ForwardTrace& trace,
                               const Eigen::VectorXd& score_grad) {
  const auto& head = params.head;
  const auto N = trace.input.cols();
  const auto T = static_cast<Eigen::Index>(params.tag_count());
  if (trace.input.rows() != head.W1.cols() || trace.pre_activation1.rows() != head.W1.rows() ||
      trace.hidden.rows() != head.W1.rows() || trace.instance_scores.rows() != T ||
      trace.pre_activation1.cols() != N || trace.instance_scores.cols() != N ||
      score_grad.size() != T) {
    throw ShapeError("backward: trace does not match the model parameters");
  }

  Eigen::MatrixXd d_scores = Eigen::MatrixXd::Zero(T, N);
  if (params.pooling == Pooling::Mean) {
    d_scores.colwise() = score_grad / static_cast<double>(N);
  } else {
    if (trace.argmax_instance.size() != static_cast<std::size_t>(T)) {
      throw ShapeError("backward: max pooling trace lacks argmax indices");
    }
    for (Eigen::Index t = 0; t < T; ++t) {
      d_scores(t, trace.argmax_instance[static_cast<std::size_t>(t)]) = score_grad[t];
    }
  }

  const Eigen::MatrixXd d_fprime = params.semantic.columns() * d_scores;  // d x N
  Gradients g;
  g.W2 = d_fprime * trace.hidden.transpose();
  g.b2 = d_fprime.rowwise().sum();
  const Eigen::MatrixXd d_pre =
      (head.W2.transpose() * d_fprime).cwiseProduct((trace.pre_activation1.array() > 0.0).cast<double>().matrix());
  g.W1 = d_pre * trace.input.transpose();
  g.b1 = d_pre.rowwise().sum();
  return g;
}

Gradients backward(const ModelParams& params, const ForwardTrace& trace,
                   std::span<const std::size_t> positives) {
  return backward_from_scores(params, trace, tag_loss_gradient(trace.bag_scores, positives));
}

Gradients finite_diff_grad(const ModelParams& params, const Eigen::MatrixXd& features,
                           std::span<const std::size_t> positives, double h) {
  if (!(h > 0.0) || !std::isfinite(h)) throw ConfigError("finite difference step must be > 0");
  ModelParams probe = params;
  Gradients g = HeadTensors::zeros_like(params.head);

  auto loss_at = [&]() {
    const double v = tag_loss(forward(probe, features).bag_scores, positives).value;
    if (!std::isfinite(v)) throw NumericError("non-finite loss at a finite-difference probe");
    return v;
  };
  auto probe_all = [&](auto& param, auto& grad) {
    for (Eigen::Index k = 0; k < param.size(); ++k) {
      const double saved = param.data()[k];
      param.data()[k] = saved + h;
      const double up = loss_at();
      param.data()[k] = saved - h;
      const double down = loss_at();
      param.data()[k] = saved;
      grad.data()[k] = (up - down) / (2.0 * h);
    }
  };
  probe_all(probe.head.W1, g.W1);
  probe_all(probe.head.b1, g.b1);
  probe_all(probe.head.W2, g.W2);
  probe_all(probe.head.b2, g.b2);
  return g;
}

double max_relative_error(const Gradients& analytic, const Gradients& numeric, double floor) {
  if (!analytic.same_shape(numeric)) throw ShapeError("gradient shapes differ");
  double worst = 0.0;
  auto scan = [&](const auto& a, const auto& b) {
    for (Eigen::Index k = 0; k < a.size(); ++k) {
      const double x = a.data()[k];
      const double y = b.data()[k];
      const double denom = std::max({std::abs(x), std::abs(y), floor});
      const double rel = std::abs(x - y) / denom;
      worst = std::isfinite(rel) ? std::max(worst, rel) : INFINITY;
    }
  };
  scan(analytic.W1, numeric.W1);
  scan(analytic.b1, numeric.b1);
  scan(analytic.W2, numeric.W2);
  scan(analytic.b2, numeric.b2);
  return worst;
}

}  // namespace miltag
