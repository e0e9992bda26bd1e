#include "miltag/trainer.hpp"

#include <cmath>

#include "miltag/error.hpp"
#include "miltag/loss.hpp"
#include "miltag/rng.hpp"
#include "text_format.hpp"

namespace miltag {

void validate(const TrainConfig& cfg) {
  auto fail = [](const std::string& field, const std::string& why) {
    throw ConfigError(field + ": " + why);
  };
  if (!(cfg.learning_rate >= 0.0) || !std::isfinite(cfg.learning_rate)) {
    fail("learning_rate", "must be a finite nonnegative number");
  }
  if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0)) fail("beta1", "must lie in [0, 1)");
  if (!(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0)) fail("beta2", "must lie in [0, 1)");
  if (!(cfg.epsilon > 0.0)) fail("epsilon", "must be positive");
  if (cfg.iterations < 1) fail("iterations", "must be >= 1");
  if (cfg.hidden_dim < 1) fail("hidden_dim", "must be >= 1");
  if (cfg.log_every < 1) fail("log_every", "must be >= 1");
}

AdamState AdamState::zeros_like(const HeadTensors& head) {
  return {HeadTensors::zeros_like(head), HeadTensors::zeros_like(head), 0};
}

ModelParams init_params(std::size_t input_dim, std::size_t hidden_dim, SemanticMatrix semantic,
                        Pooling pooling, std::uint64_t seed) {
  if (input_dim == 0 || hidden_dim == 0 || semantic.dim() == 0) {
    throw ConfigError("init_params: dimensions must be positive");
  }
  Rng rng(seed);
  const auto D = static_cast<Eigen::Index>(input_dim);
  const auto H = static_cast<Eigen::Index>(hidden_dim);
  const auto d = static_cast<Eigen::Index>(semantic.dim());
  const double a1 = std::sqrt(6.0 / static_cast<double>(D));
  const double a2 = std::sqrt(6.0 / static_cast<double>(H + d));

  ModelParams p;
  p.head.W1.resize(H, D);
  for (Eigen::Index k = 0; k < p.head.W1.size(); ++k) p.head.W1.data()[k] = rng.uniform(-a1, a1);
  p.head.b1 = Eigen::VectorXd::Zero(H);
  p.head.W2.resize(d, H);
  for (Eigen::Index k = 0; k < p.head.W2.size(); ++k) p.head.W2.data()[k] = rng.uniform(-a2, a2);
  p.head.b2 = Eigen::VectorXd::Zero(d);
  p.semantic = std::move(semantic);
  p.pooling = pooling;
  return p;
}

namespace {

template <typename Tensor>
void adam_update(Tensor& theta, const Tensor& g, Tensor& m, Tensor& v, double lr, double b1,
                 double b2, double eps, double c1, double c2) {
  m = b1 * m + (1.0 - b1) * g;
  v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
  theta.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
}

}  // namespace

void adam_step(HeadTensors& params, const Gradients& grads, AdamState& state,
               const TrainConfig& cfg) {
  if (!params.same_shape(grads) || !params.same_shape(state.m) || !params.same_shape(state.v)) {
    throw ShapeError("adam_step: parameter, gradient and moment shapes differ");
  }
  if (!grads.all_finite()) throw NumericError("adam_step: non-finite gradient entry");

  ++state.t;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  const double lr = cfg.learning_rate;
  adam_update(params.W1, grads.W1, state.m.W1, state.v.W1, lr, cfg.beta1, cfg.beta2, cfg.epsilon, c1, c2);
  adam_update(params.b1, grads.b1, state.m.b1, state.v.b1, lr, cfg.beta1, cfg.beta2, cfg.epsilon, c1, c2);
  adam_update(params.W2, grads.W2, state.m.W2, state.v.W2, lr, cfg.beta1, cfg.beta2, cfg.epsilon, c1, c2);
  adam_update(params.b2, grads.b2, state.m.b2, state.v.b2, lr, cfg.beta1, cfg.beta2, cfg.epsilon, c1, c2);
}

TrainResult train(const Dataset& dataset, SemanticMatrix semantic, const TrainConfig& cfg,
                  const TrainHooks& hooks) {
  validate(cfg);
  if (semantic.tags() != dataset.seen_tags) {
    throw ConfigError("training semantic matrix must list exactly the dataset's seen tags");
  }
  auto warn = [&](const std::string& msg) {
    if (hooks.on_warning) hooks.on_warning(msg);
  };

  // Resolve positives once; degenerate bags never enter the epoch order.
  std::vector<std::size_t> usable;
  std::vector<std::vector<std::size_t>> positives(dataset.bags.size());
  TrainResult result;
  for (std::size_t i = 0; i < dataset.bags.size(); ++i) {
    positives[i] = tag_indices(dataset.bags[i], dataset.seen_tags);
    const auto k = positives[i].size();
    if (k == 0 || k == dataset.seen_tags.size()) {
      warn("skipping degenerate bag '" + dataset.bags[i].id + "'");
      ++result.skipped_bags;
      continue;
    }
    usable.push_back(i);
  }
  if (usable.empty()) throw DegenerateBagError("dataset has no bag with both positive and negative tags");

  result.params = init_params(dataset.feature_dim, cfg.hidden_dim, std::move(semantic),
                              cfg.pooling, cfg.seed);
  result.optimizer = AdamState::zeros_like(result.params.head);

  // Separate stream from initialization so changing H does not reorder epochs.
  Rng order_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order;
  std::size_t cursor = 0;
  double window_sum = 0.0;
  std::size_t window_count = 0;

  for (std::size_t it = 1; it <= cfg.iterations; ++it) {
    if (cursor == order.size()) {
      order = usable;
      order_rng.shuffle(order);
      cursor = 0;
    }
    const std::size_t b = order[cursor++];
    const Bag& bag = dataset.bags[b];

    const auto trace = forward(result.params, bag);
    const double loss = tag_loss(trace.bag_scores, positives[b]).value;
    if (!std::isfinite(loss)) {
      throw NumericError("non-finite loss at iteration " + std::to_string(it) + " on bag '" +
                         bag.id + "'");
    }
    const auto grads = backward(result.params, trace, positives[b]);
    adam_step(result.params.head, grads, result.optimizer, cfg);

    window_sum += loss;
    ++window_count;
    if (it % cfg.log_every == 0 || it == cfg.iterations) {
      LossPoint point{it, window_sum / static_cast<double>(window_count)};
      result.loss_curve.push_back(point);
      if (hooks.on_log) hooks.on_log(point);
      window_sum = 0.0;
      window_count = 0;
    }
    if (cfg.checkpoint_every > 0 && it % cfg.checkpoint_every == 0 && hooks.on_checkpoint) {
      hooks.on_checkpoint(it, result.params);
    }
  }
  return result;
}

void save_loss_curve(const std::vector<LossPoint>& curve, const std::filesystem::path& path) {
  std::string out = "iteration,loss\n";
  for (const auto& p : curve) {
    out += std::to_string(p.iteration);
    out += ',';
    out += detail::format_double(p.loss);
    out += '\n';
  }
  detail::write_file(path, out);
}

}  // namespace miltag
