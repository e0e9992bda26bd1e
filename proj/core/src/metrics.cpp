#include "miltag/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>

#include <json.hpp>

#include "miltag/error.hpp"
#include "miltag/rng.hpp"
#include "text_format.hpp"

namespace miltag {

double image_ap(std::span<const std::size_t> ranking, std::span<const std::size_t> ground_truth) {
  if (ground_truth.empty()) throw ConfigError("image_ap: empty ground truth");
  std::vector<char> relevant_at(ranking.size(), 0);
  std::size_t found = 0;
  for (auto g : ground_truth) {
    auto it = std::find(ranking.begin(), ranking.end(), g);
    if (it == ranking.end()) {
      throw ConfigError("image_ap: ground-truth tag " + std::to_string(g) +
                        " is not in the ranking");
    }
    auto& slot = relevant_at[static_cast<std::size_t>(it - ranking.begin())];
    if (!slot) ++found;
    slot = 1;
  }
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t j = 0; j < ranking.size() && hits < found; ++j) {
    if (!relevant_at[j]) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(j + 1);
  }
  return sum / static_cast<double>(found);
}

PrfAtK prf_at_k(std::span<const std::size_t> ranking, std::span<const std::size_t> ground_truth,
                std::size_t k) {
  if (k == 0 || k > ranking.size()) {
    throw ConfigError("K=" + std::to_string(k) + " is invalid for a ranking of " +
                      std::to_string(ranking.size()) + " tags");
  }
  if (ground_truth.empty()) throw ConfigError("prf_at_k: empty ground truth");
  std::size_t hits = 0;
  for (std::size_t j = 0; j < k; ++j) {
    if (std::find(ground_truth.begin(), ground_truth.end(), ranking[j]) != ground_truth.end()) {
      ++hits;
    }
  }
  PrfAtK out;
  out.k = k;
  out.precision = static_cast<double>(hits) / static_cast<double>(k);
  out.recall = static_cast<double>(hits) / static_cast<double>(ground_truth.size());
  const double pr = out.precision + out.recall;
  out.f1 = pr > 0.0 ? 2.0 * out.precision * out.recall / pr : 0.0;
  return out;
}

namespace {

double harmonic(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

void check_ks(std::span<const std::size_t> ks, std::size_t eligible, Task task) {
  for (auto k : ks) {
    if (k == 0 || k > eligible) {
      throw ConfigError("K=" + std::to_string(k) + " is invalid for task " +
                        std::string(to_string(task)) + " with " + std::to_string(eligible) +
                        " eligible tags");
    }
  }
}

std::vector<std::size_t> restrict_truth(const std::vector<std::size_t>& gt, std::size_t lo,
                                        std::size_t hi) {
  std::vector<std::size_t> out;
  for (auto g : gt) {
    if (g >= lo && g < hi && std::find(out.begin(), out.end(), g) == out.end()) out.push_back(g);
  }
  return out;
}

void check_universe(std::span<const ScoredImage> images, Task task, std::size_t seen,
                    std::size_t& total) {
  if (images.empty()) throw EmptyReportError("no images to evaluate");
  total = static_cast<std::size_t>(images.front().scores.size());
  for (const auto& im : images) {
    if (static_cast<std::size_t>(im.scores.size()) != total) {
      throw ShapeError("images have score vectors of different lengths");
    }
    for (auto g : im.ground_truth) {
      if (g >= total) throw ShapeError("ground-truth tag index outside the tag universe");
    }
  }
  if (seen > total) throw ConfigError("seen count exceeds the tag universe");
  if (task != Task::Conventional && seen == total) {
    throw ConfigError(std::string("task ") + std::string(to_string(task)) +
                      " needs unseen tags, but the score vectors cover only the seen tags");
  }
  if (seen == 0 && task == Task::Conventional) {
    throw ConfigError("task conventional needs seen tags");
  }
}

}  // namespace

EvalReport evaluate_scores(std::span<const ScoredImage> images, Task task,
                           std::span<const std::size_t> ks, std::size_t seen) {
  std::size_t total = 0;
  check_universe(images, task, seen, total);
  const auto [lo, hi] = task_range(task, seen, total);
  check_ks(ks, hi - lo, task);

  EvalReport report;
  report.task = task;
  double ap_sum = 0.0;
  std::vector<double> p_sum(ks.size(), 0.0), r_sum(ks.size(), 0.0);
  std::map<std::size_t, std::pair<std::size_t, std::size_t>> per_class;  // tag -> (images, correct)

  for (const auto& im : images) {
    const auto gt = restrict_truth(im.ground_truth, lo, hi);
    if (gt.empty()) {
      ++report.images_skipped;
      continue;
    }
    ++report.images_evaluated;
    const auto ranking = rank_tags(im.scores, task, seen);
    ap_sum += image_ap(ranking, gt);
    for (std::size_t i = 0; i < ks.size(); ++i) {
      const auto m = prf_at_k(ranking, gt, ks[i]);
      p_sum[i] += m.precision;
      r_sum[i] += m.recall;
    }
    if (task == Task::ZSR) {
      for (auto c : gt) {
        auto& [n, correct] = per_class[c];
        ++n;
        if (ranking.front() == c) ++correct;
      }
    }
  }
  if (report.images_evaluated == 0) {
    throw EmptyReportError("every image was skipped (no ground truth within the task's tags)");
  }

  const auto n = static_cast<double>(report.images_evaluated);
  report.miap = ap_sum / n;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    const double p = p_sum[i] / n;
    const double r = r_sum[i] / n;
    report.per_k.push_back({ks[i], p, r, harmonic(p, r)});
  }
  if (task == Task::ZSR) {
    double acc_sum = 0.0;
    for (const auto& [tag, counts] : per_class) {
      const double acc = static_cast<double>(counts.second) / static_cast<double>(counts.first);
      report.zsr_per_class.push_back({tag, counts.first, acc});
      acc_sum += acc;
    }
    report.zsr_top1 = acc_sum / static_cast<double>(per_class.size());
  }
  return report;
}

EvalReport evaluate(const ModelParams& params, const Dataset& test, Task task,
                    std::span<const std::size_t> ks) {
  const auto& tags = params.semantic.tags();
  const std::size_t seen = test.seen_count();
  if (tags.size() < seen || !std::equal(test.seen_tags.begin(), test.seen_tags.end(), tags.begin())) {
    throw ConfigError("model tag universe does not start with the test set's seen tags");
  }
  if (task != Task::Conventional) {
    const auto all = test.all_tags();
    if (tags != all) {
      throw ConfigError(std::string("task ") + std::string(to_string(task)) +
                        " needs the extended semantic matrix (seen then unseen tags)");
    }
  }
  std::vector<ScoredImage> images;
  images.reserve(test.bags.size());
  for (const auto& bag : test.bags) {
    images.push_back({forward(params, bag).bag_scores, tag_indices(bag, tags)});
  }
  return evaluate_scores(images, task, ks, seen);
}

EvalReport brute_force_report(std::span<const ScoredImage> images, Task task,
                              std::span<const std::size_t> ks, std::size_t seen) {
  if (images.empty()) throw EmptyReportError("no images to evaluate");
  const std::size_t total = static_cast<std::size_t>(images.front().scores.size());
  if (seen > total || (task != Task::Conventional && seen == total)) {
    throw ConfigError("task/universe mismatch");
  }
  std::size_t lo = 0, hi = total;
  if (task == Task::Conventional) hi = seen;
  if (task == Task::ZST || task == Task::ZSR) lo = seen;
  for (auto k : ks) {
    if (k < 1 || k > hi - lo) throw ConfigError("invalid K");
  }

  auto eligible = [&](std::size_t t) { return t >= lo && t < hi; };
  EvalReport report;
  report.task = task;
  double ap_sum = 0.0;
  std::vector<double> p_sum(ks.size()), r_sum(ks.size());
  std::vector<std::size_t> class_images(total, 0), class_correct(total, 0);

  for (const auto& im : images) {
    std::vector<char> is_gt(total, 0);
    for (auto g : im.ground_truth) {
      if (eligible(g)) is_gt[g] = 1;
    }
    const auto G = static_cast<std::size_t>(std::count(is_gt.begin(), is_gt.end(), 1));
    if (G == 0) {
      ++report.images_skipped;
      continue;
    }
    ++report.images_evaluated;

    // 1-based rank of every eligible tag: higher score first, lower index on ties.
    std::vector<std::size_t> rank(total, 0);
    std::size_t top1 = total;
    for (std::size_t t = lo; t < hi; ++t) {
      std::size_t r = 1;
      for (std::size_t u = lo; u < hi; ++u) {
        if (im.scores[static_cast<Eigen::Index>(u)] > im.scores[static_cast<Eigen::Index>(t)] ||
            (im.scores[static_cast<Eigen::Index>(u)] == im.scores[static_cast<Eigen::Index>(t)] && u < t)) {
          ++r;
        }
      }
      rank[t] = r;
      if (r == 1) top1 = t;
    }

    double ap = 0.0;
    for (std::size_t g = lo; g < hi; ++g) {
      if (!is_gt[g]) continue;
      std::size_t above = 0;
      for (std::size_t h = lo; h < hi; ++h) {
        if (is_gt[h] && rank[h] <= rank[g]) ++above;
      }
      ap += static_cast<double>(above) / static_cast<double>(rank[g]);
    }
    ap_sum += ap / static_cast<double>(G);

    for (std::size_t i = 0; i < ks.size(); ++i) {
      std::size_t hits = 0;
      for (std::size_t g = lo; g < hi; ++g) {
        if (is_gt[g] && rank[g] <= ks[i]) ++hits;
      }
      p_sum[i] += static_cast<double>(hits) / static_cast<double>(ks[i]);
      r_sum[i] += static_cast<double>(hits) / static_cast<double>(G);
    }

    if (task == Task::ZSR) {
      for (std::size_t c = lo; c < hi; ++c) {
        if (!is_gt[c]) continue;
        ++class_images[c];
        if (top1 == c) ++class_correct[c];
      }
    }
  }
  if (report.images_evaluated == 0) throw EmptyReportError("every image was skipped");

  const auto n = static_cast<double>(report.images_evaluated);
  report.miap = ap_sum / n;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    const double p = p_sum[i] / n, r = r_sum[i] / n;
    report.per_k.push_back({ks[i], p, r, p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0});
  }
  if (task == Task::ZSR) {
    double sum = 0.0;
    std::size_t classes = 0;
    for (std::size_t c = lo; c < hi; ++c) {
      if (class_images[c] == 0) continue;
      const double acc = static_cast<double>(class_correct[c]) / static_cast<double>(class_images[c]);
      report.zsr_per_class.push_back({c, class_images[c], acc});
      sum += acc;
      ++classes;
    }
    report.zsr_top1 = sum / static_cast<double>(classes);
  }
  return report;
}

BaselineStats random_baseline(const Dataset& test, Task task, std::size_t trials,
                              std::uint64_t seed) {
  if (trials < 100) throw ConfigError("random_baseline needs at least 100 trials");
  const auto universe = test.all_tags();
  const auto [lo, hi] = task_range(task, test.seen_count(), universe.size());
  if (lo == hi) throw ConfigError("task has no eligible tags");

  std::vector<std::vector<std::size_t>> truths;
  for (const auto& bag : test.bags) {
    auto gt = restrict_truth(tag_indices(bag, universe), lo, hi);
    if (!gt.empty()) truths.push_back(std::move(gt));
  }
  if (truths.empty()) throw EmptyReportError("no test image has ground truth within the task's tags");

  Rng rng(seed);
  std::vector<std::size_t> ranking(hi - lo);
  std::vector<double> miaps;
  miaps.reserve(trials);
  for (std::size_t trial = 0; trial < trials; ++trial) {
    double sum = 0.0;
    for (const auto& gt : truths) {
      std::iota(ranking.begin(), ranking.end(), lo);
      rng.shuffle(ranking);
      sum += image_ap(ranking, gt);
    }
    miaps.push_back(sum / static_cast<double>(truths.size()));
  }
  BaselineStats out;
  out.mean = std::accumulate(miaps.begin(), miaps.end(), 0.0) / static_cast<double>(trials);
  double ss = 0.0;
  for (double m : miaps) ss += (m - out.mean) * (m - out.mean);
  out.stddev = std::sqrt(ss / static_cast<double>(trials - 1));
  return out;
}

namespace {

std::string tag_label(std::size_t idx, const std::vector<std::string>& names) {
  return idx < names.size() ? names[idx] : std::to_string(idx);
}

}  // namespace

std::string format_report_text(const EvalReport& report, const std::vector<std::string>& tag_names) {
  char buf[160];
  std::string out;
  out += "task: " + std::string(to_string(report.task)) + "\n";
  std::snprintf(buf, sizeof buf, "miap: %.4f\n", report.miap);
  out += buf;
  for (const auto& m : report.per_k) {
    std::snprintf(buf, sizeof buf, "k%zu: precision %.4f recall %.4f f1 %.4f\n", m.k, m.precision,
                  m.recall, m.f1);
    out += buf;
  }
  if (report.zsr_top1) {
    std::snprintf(buf, sizeof buf, "zsr_top1: %.4f\n", *report.zsr_top1);
    out += buf;
    for (const auto& c : report.zsr_per_class) {
      std::snprintf(buf, sizeof buf, "zsr_class %s: top1 %.4f images %zu\n",
                    tag_label(c.tag, tag_names).c_str(), c.top1, c.images);
      out += buf;
    }
  }
  out += "images_evaluated: " + std::to_string(report.images_evaluated) + "\n";
  out += "images_skipped: " + std::to_string(report.images_skipped) + "\n";
  return out;
}

std::string format_report_jsonl(const EvalReport& report, const std::vector<std::string>& tag_names) {
  using nlohmann::json;
  std::string out;
  json summary{{"record", "summary"},
               {"task", to_string(report.task)},
               {"miap", report.miap},
               {"images_evaluated", report.images_evaluated},
               {"images_skipped", report.images_skipped}};
  if (report.zsr_top1) summary["zsr_top1"] = *report.zsr_top1;
  out += summary.dump() + "\n";
  for (const auto& m : report.per_k) {
    out += json{{"record", "top_k"}, {"k", m.k}, {"precision", m.precision},
                {"recall", m.recall}, {"f1", m.f1}}
               .dump() +
           "\n";
  }
  for (const auto& c : report.zsr_per_class) {
    out += json{{"record", "zsr_class"}, {"tag", tag_label(c.tag, tag_names)},
                {"images", c.images}, {"top1", c.top1}}
               .dump() +
           "\n";
  }
  return out;
}

}  // namespace miltag
