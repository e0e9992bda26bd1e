#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "miltag/dataset.hpp"
#include "miltag/model.hpp"

namespace miltag {

struct PrfAtK {
  std::size_t k = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct ClassAccuracy {
  std::size_t tag = 0;  // index in the tag universe
  std::size_t images = 0;
  double top1 = 0.0;
};

struct EvalReport {
  Task task = Task::Conventional;
  double miap = 0.0;
  std::vector<PrfAtK> per_k;  // in requested order
  std::optional<double> zsr_top1;
  std::vector<ClassAccuracy> zsr_per_class;  // ZSR only, ascending tag index
  std::size_t images_evaluated = 0;
  std::size_t images_skipped = 0;
};

// Average precision of one ranked list: (1/|G|) * sum over ranks j holding a
// relevant tag of (relevant tags within the top j) / j.
double image_ap(std::span<const std::size_t> ranking, std::span<const std::size_t> ground_truth);

// Precision, recall and F1 of the top K entries of `ranking`.
PrfAtK prf_at_k(std::span<const std::size_t> ranking, std::span<const std::size_t> ground_truth,
                std::size_t k);

// Bag scores over the full tag universe plus ground-truth tag indices.
struct ScoredImage {
  Eigen::VectorXd scores;
  std::vector<std::size_t> ground_truth;
};

// Ground truth is intersected with the task's tag subset; images left with an
// empty set are skipped. MiAP, P and R are plain means over the remaining
// images; F1 at each K is the harmonic mean of the aggregated P and R.
EvalReport evaluate_scores(std::span<const ScoredImage> images, Task task,
                           std::span<const std::size_t> ks, std::size_t seen);

// Runs the model on every test bag. `params` must carry the extended
// semantic matrix (seen tags then unseen tags) for ZST, GZST and ZSR.
EvalReport evaluate(const ModelParams& params, const Dataset& test, Task task,
                    std::span<const std::size_t> ks);

// Reference implementation of evaluate_scores by direct rank counting; kept
// independent of the ranking and AP code above.
EvalReport brute_force_report(std::span<const ScoredImage> images, Task task,
                              std::span<const std::size_t> ks, std::size_t seen);

struct BaselineStats {
  double mean = 0.0;
  double stddev = 0.0;
};

// MiAP of uniformly random rankings of the task's tag subset, over `trials`
// Monte Carlo repetitions (trials >= 100).
BaselineStats random_baseline(const Dataset& test, Task task, std::size_t trials,
                              std::uint64_t seed);

// `key: value` lines for people.
std::string format_report_text(const EvalReport& report,
                               const std::vector<std::string>& tag_names = {});
// One JSON object per line: a summary record, one per K, one per ZSR class.
std::string format_report_jsonl(const EvalReport& report,
                                const std::vector<std::string>& tag_names = {});

}  // namespace miltag
