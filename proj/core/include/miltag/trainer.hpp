#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "miltag/dataset.hpp"
#include "miltag/model.hpp"

namespace miltag {

struct TrainConfig {
  double learning_rate = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t iterations = 5000;
  std::uint64_t seed = 1;
  Pooling pooling = Pooling::Mean;
  std::size_t hidden_dim = 512;
  std::size_t log_every = 100;
  std::size_t checkpoint_every = 0;  // 0 disables intermediate checkpoints

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// Throws ConfigError naming the offending field.
void validate(const TrainConfig& cfg);

struct AdamState {
  HeadTensors m;
  HeadTensors v;
  std::uint64_t t = 0;

  static AdamState zeros_like(const HeadTensors& head);
};

// W1 ~ U(+-sqrt(6/D)), W2 ~ U(+-sqrt(6/(H+d))), zero biases.
ModelParams init_params(std::size_t input_dim, std::size_t hidden_dim, SemanticMatrix semantic,
                        Pooling pooling, std::uint64_t seed);

// One bias-corrected Adam update of the trainable head. The frozen semantic
// matrix is not touched.
void adam_step(HeadTensors& params, const Gradients& grads, AdamState& state,
               const TrainConfig& cfg);

struct LossPoint {
  std::size_t iteration = 0;  // 1-based count of applied updates
  double loss = 0.0;          // mean loss over the preceding log window

  friend bool operator==(const LossPoint&, const LossPoint&) = default;
};

struct TrainResult {
  ModelParams params;
  std::vector<LossPoint> loss_curve;
  AdamState optimizer;
  std::size_t skipped_bags = 0;  // degenerate bags excluded from the epoch order
};

struct TrainHooks {
  // Called every cfg.checkpoint_every updates with the current parameters.
  std::function<void(std::size_t iteration, const ModelParams&)> on_checkpoint;
  std::function<void(const LossPoint&)> on_log;
  std::function<void(const std::string&)> on_warning;
};

// One bag per update, visiting bags in a freshly shuffled order every epoch.
// `semantic` must be built from dataset.seen_tags.
TrainResult train(const Dataset& dataset, SemanticMatrix semantic, const TrainConfig& cfg,
                  const TrainHooks& hooks = {});

void save_loss_curve(const std::vector<LossPoint>& curve, const std::filesystem::path& path);

}  // namespace miltag
