#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "miltag/dataset.hpp"
#include "miltag/embeddings.hpp"

namespace miltag {

enum class Pooling { Mean, Max };

// Tag universes a prediction is drawn from:
//   Conventional - seen tags [0, S)
//   ZST          - unseen tags [S, C)
//   GZST         - all tags [0, C)
//   ZSR          - single best unseen tag
enum class Task { Conventional, ZST, GZST, ZSR };

std::string_view to_string(Pooling p);
std::string_view to_string(Task t);
Pooling parse_pooling(std::string_view text);
Task parse_task(std::string_view text);

// The trainable tensors of the head. Also used for gradients and for the
// optimizer's moment estimates, which share the same shapes.
struct HeadTensors {
  Eigen::MatrixXd W1;  // H x D
  Eigen::VectorXd b1;  // H
  Eigen::MatrixXd W2;  // d x H
  Eigen::VectorXd b2;  // d

  static HeadTensors zeros_like(const HeadTensors& other);
  std::size_t scalar_count() const;
  bool same_shape(const HeadTensors& other) const;
  bool all_finite() const;

  friend bool operator==(const HeadTensors& a, const HeadTensors& b);
};

using Gradients = HeadTensors;

struct ModelParams {
  HeadTensors head;
  // Frozen projection: d x S during training, d x C once W' is installed.
  SemanticMatrix semantic;
  Pooling pooling = Pooling::Mean;

  std::size_t input_dim() const noexcept { return static_cast<std::size_t>(head.W1.cols()); }
  std::size_t hidden_dim() const noexcept { return static_cast<std::size_t>(head.W1.rows()); }
  std::size_t embed_dim() const noexcept { return static_cast<std::size_t>(head.W2.rows()); }
  std::size_t tag_count() const noexcept { return semantic.tag_count(); }

  // Throws ShapeError unless D -> H -> d -> T chains.
  void check_shapes() const;
};

// Same trained head with a different frozen matrix (W -> W').
ModelParams with_semantic(const ModelParams& params, SemanticMatrix semantic);

struct ForwardTrace {
  Eigen::MatrixXd input;            // D x (n+1)
  Eigen::MatrixXd pre_activation1;  // H x (n+1)
  Eigen::MatrixXd hidden;           // H x (n+1)
  Eigen::MatrixXd f_prime;          // d x (n+1)
  Eigen::MatrixXd instance_scores;  // T x (n+1)
  Eigen::VectorXd bag_scores;       // T
  std::vector<Eigen::Index> argmax_instance;  // per tag, Max pooling only
};

struct Pooled {
  Eigen::VectorXd scores;
  std::vector<Eigen::Index> argmax;  // empty for Mean pooling
};

// Per-tag reduction over instance columns. Max ties go to the first maximal
// column.
Pooled pool(const Eigen::MatrixXd& instance_scores, Pooling mode);

ForwardTrace forward(const ModelParams& params, const Eigen::MatrixXd& features);
inline ForwardTrace forward(const ModelParams& params, const Bag& bag) {
  return forward(params, bag.features);
}

// Tag indices eligible for a task given S seen tags out of `total`.
std::pair<std::size_t, std::size_t> task_range(Task task, std::size_t seen, std::size_t total);

// Full ranking of the task's eligible tags: descending score, ties by
// ascending tag index.
std::vector<std::size_t> rank_tags(const Eigen::VectorXd& bag_scores, Task task, std::size_t seen);

// First K entries of rank_tags (K is forced to 1 for ZSR).
std::vector<std::size_t> predict_topk(const Eigen::VectorXd& bag_scores, Task task,
                                      std::size_t k, std::size_t seen);

}  // namespace miltag
