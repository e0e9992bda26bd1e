#include "miltag/model.hpp"

#include <algorithm>
#include <numeric>

#include "miltag/error.hpp"

namespace miltag {

std::string_view to_string(Pooling p) { return p == Pooling::Mean ? "mean" : "max"; }

std::string_view to_string(Task t) {
  switch (t) {
    case Task::Conventional: return "conventional";
    case Task::ZST: return "zst";
    case Task::GZST: return "gzst";
    case Task::ZSR: return "zsr";
  }
  return "?";
}

Pooling parse_pooling(std::string_view text) {
  if (text == "mean") return Pooling::Mean;
  if (text == "max") return Pooling::Max;
  throw ConfigError("unknown pooling '" + std::string(text) + "' (expected mean|max)");
}

Task parse_task(std::string_view text) {
  if (text == "conventional") return Task::Conventional;
  if (text == "zst") return Task::ZST;
  if (text == "gzst") return Task::GZST;
  if (text == "zsr") return Task::ZSR;
  throw ConfigError("unknown task '" + std::string(text) + "' (expected conventional|zst|gzst|zsr)");
}

HeadTensors HeadTensors::zeros_like(const HeadTensors& o) {
  return {Eigen::MatrixXd::Zero(o.W1.rows(), o.W1.cols()), Eigen::VectorXd::Zero(o.b1.size()),
          Eigen::MatrixXd::Zero(o.W2.rows(), o.W2.cols()), Eigen::VectorXd::Zero(o.b2.size())};
}

std::size_t HeadTensors::scalar_count() const {
  return static_cast<std::size_t>(W1.size() + b1.size() + W2.size() + b2.size());
}

bool HeadTensors::same_shape(const HeadTensors& o) const {
  return W1.rows() == o.W1.rows() && W1.cols() == o.W1.cols() && b1.size() == o.b1.size() &&
         W2.rows() == o.W2.rows() && W2.cols() == o.W2.cols() && b2.size() == o.b2.size();
}

bool HeadTensors::all_finite() const {
  return W1.allFinite() && b1.allFinite() && W2.allFinite() && b2.allFinite();
}

bool operator==(const HeadTensors& a, const HeadTensors& b) {
  return a.same_shape(b) && a.W1 == b.W1 && a.b1 == b.b1 && a.W2 == b.W2 && a.b2 == b.b2;
}

void ModelParams::check_shapes() const {
  const auto H = head.W1.rows();
  const auto d = head.W2.rows();
  if (head.b1.size() != H || head.W2.cols() != H || head.b2.size() != d) {
    throw ShapeError("FC layer shapes do not chain");
  }
  if (static_cast<Eigen::Index>(semantic.dim()) != d) {
    throw ShapeError("semantic matrix has dimension " + std::to_string(semantic.dim()) +
                     ", head outputs " + std::to_string(d));
  }
}

ModelParams with_semantic(const ModelParams& params, SemanticMatrix semantic) {
  ModelParams out{params.head, std::move(semantic), params.pooling};
  out.check_shapes();
  return out;
}

Pooled pool(const Eigen::MatrixXd& instance_scores, Pooling mode) {
  if (instance_scores.cols() < 1 || instance_scores.rows() < 1) {
    throw ShapeError("pool: empty instance score matrix");
  }
  Pooled out;
  if (mode == Pooling::Mean) {
    out.scores = instance_scores.rowwise().mean();
    return out;
  }
  const auto T = instance_scores.rows();
  out.scores.resize(T);
  out.argmax.resize(static_cast<std::size_t>(T));
  for (Eigen::Index t = 0; t < T; ++t) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < instance_scores.cols(); ++i) {
      if (instance_scores(t, i) > instance_scores(t, best)) best = i;
    }
    out.scores[t] = instance_scores(t, best);
    out.argmax[static_cast<std::size_t>(t)] = best;
  }
  return out;
}

ForwardTrace forward(const ModelParams& params, const Eigen::MatrixXd& features) {
  params.check_shapes();
  if (features.rows() != params.head.W1.cols()) {
    throw ShapeError("bag feature dimension " + std::to_string(features.rows()) +
                     " does not match model input " + std::to_string(params.head.W1.cols()));
  }
  if (features.cols() < 1) throw ShapeError("bag has no instances");
  if (!features.allFinite()) throw NumericError("bag features contain non-finite values");

  ForwardTrace tr;
  tr.input = features;
  tr.pre_activation1 = (params.head.W1 * features).colwise() + params.head.b1;
  tr.hidden = tr.pre_activation1.cwiseMax(0.0);
  tr.f_prime = (params.head.W2 * tr.hidden).colwise() + params.head.b2;
  tr.instance_scores = params.semantic.columns().transpose() * tr.f_prime;
  auto pooled = pool(tr.instance_scores, params.pooling);
  tr.bag_scores = std::move(pooled.scores);
  tr.argmax_instance = std::move(pooled.argmax);
  return tr;
}

std::pair<std::size_t, std::size_t> task_range(Task task, std::size_t seen, std::size_t total) {
  if (seen > total) throw ShapeError("seen count exceeds tag universe");
  switch (task) {
    case Task::Conventional: return {0, seen};
    case Task::ZST:
    case Task::ZSR:
      return {seen, total};
    case Task::GZST: return {0, total};
  }
  return {0, 0};
}

std::vector<std::size_t> rank_tags(const Eigen::VectorXd& bag_scores, Task task, std::size_t seen) {
  const auto [lo, hi] = task_range(task, seen, static_cast<std::size_t>(bag_scores.size()));
  if (lo == hi) {
    throw ConfigError(std::string("task ") + std::string(to_string(task)) +
                      " has no eligible tags in a universe of " +
                      std::to_string(bag_scores.size()) + " with " + std::to_string(seen) + " seen");
  }
  std::vector<std::size_t> order(hi - lo);
  std::iota(order.begin(), order.end(), lo);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return bag_scores[static_cast<Eigen::Index>(a)] > bag_scores[static_cast<Eigen::Index>(b)];
  });
  return order;
}

std::vector<std::size_t> predict_topk(const Eigen::VectorXd& bag_scores, Task task,
                                      std::size_t k, std::size_t seen) {
  if (task == Task::ZSR) k = 1;
  if (k == 0) throw ConfigError("K must be positive");
  auto order = rank_tags(bag_scores, task, seen);
  if (k > order.size()) {
    throw ConfigError("K=" + std::to_string(k) + " exceeds the " + std::to_string(order.size()) +
                      " tags eligible for task " + std::string(to_string(task)));
  }
  order.resize(k);
  return order;
}

}  // namespace miltag
