#include "commands.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "miltag/checkpoint.hpp"
#include "miltag/dataset.hpp"
#include "miltag/embeddings.hpp"
#include "miltag/error.hpp"
#include "miltag/loss.hpp"
#include "miltag/metrics.hpp"
#include "miltag/model.hpp"
#include "miltag/trainer.hpp"

namespace miltag::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

Range<std::size_t> parse_range(const std::string& flag, const std::string& text) {
  std::size_t lo = 0, hi = 0;
  char sep = 0;
  std::istringstream in(text);
  if (!(in >> lo)) throw ConfigError(flag + ": expected MIN,MAX");
  if (in >> sep) {
    if (sep != ',' || !(in >> hi)) throw ConfigError(flag + ": expected MIN,MAX");
  } else {
    hi = lo;
  }
  return {lo, hi};
}

std::string format_range(Range<std::size_t> r) {
  return std::to_string(r.min) + "," + std::to_string(r.max);
}

std::vector<std::size_t> parse_ks(const std::string& text) {
  std::vector<std::size_t> ks;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::size_t pos = 0;
    long long k = 0;
    try {
      k = std::stoll(item, &pos);
    } catch (const std::exception&) {
      throw ConfigError("--k: cannot parse '" + item + "'");
    }
    if (pos != item.size() || k < 1) throw ConfigError("--k: values must be positive integers");
    ks.push_back(static_cast<std::size_t>(k));
  }
  if (ks.empty()) throw ConfigError("--k: no values given");
  return ks;
}

// Library validators name struct fields; the CLI reports the matching flag.
[[noreturn]] void rethrow_with_flag(const ConfigError& e) {
  std::string msg = e.what();
  const auto colon = msg.find(':');
  if (colon != std::string::npos && msg.find(' ') > colon) {
    std::string field = msg.substr(0, colon);
    for (auto& c : field) {
      if (c == '_') c = '-';
    }
    msg = "--" + field + msg.substr(colon);
  }
  throw ConfigError(msg);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

void write_manifest(const fs::path& path, const std::string& command, std::uint64_t seed,
                    ordered_json config, ordered_json inputs, ordered_json outputs) {
  ordered_json m;
  m["command"] = command;
  m["version"] = kVersion;
  m["seed"] = seed;
  m["config"] = std::move(config);
  m["inputs"] = std::move(inputs);
  m["outputs"] = std::move(outputs);
  write_text(path, m.dump(2) + "\n");
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());
}

std::string data_file(const std::string& explicit_path, const std::string& data_dir,
                      const char* default_name) {
  if (!explicit_path.empty()) return explicit_path;
  if (!data_dir.empty()) return (fs::path(data_dir) / default_name).string();
  return {};
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw ConfigError(std::string(flag) + " is required");
}

EmbeddingTable load_normalized(const std::string& path, std::ostream& err) {
  auto loaded = load_embeddings(path);
  if (loaded.duplicates > 0) {
    err << "warning: " << loaded.duplicates << " duplicate token(s) in " << path
        << "; last occurrence kept\n";
  }
  return normalize_table(loaded.table);
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  SynthConfig cfg;
  std::string out;
  std::string tags = "1,3";
  std::string test_tags = "1,1";
  std::string distractors = "0,2";
};

void add_synth(CLI::App& app, SynthArgs& a) {
  app.add_option("--out", a.out, "Output directory")->required();
  app.add_option("--seed", a.cfg.seed, "Generator seed")->capture_default_str();
  app.add_option("--num-seen", a.cfg.num_seen, "Seen tag count S")->capture_default_str();
  app.add_option("--num-unseen", a.cfg.num_unseen, "Unseen tag count U")->capture_default_str();
  app.add_option("--embed-dim", a.cfg.embed_dim, "Word vector dimension d")->capture_default_str();
  app.add_option("--feature-dim", a.cfg.feature_dim, "Instance feature dimension D")->capture_default_str();
  app.add_option("--semantic-rank", a.cfg.semantic_rank, "Rank of the shared tag-vector subspace, 0 for isotropic")->capture_default_str();
  app.add_option("--semantic-residual", a.cfg.semantic_residual, "Off-subspace component of tag vectors")->capture_default_str();
  app.add_option("--bag-size", a.cfg.bag_size, "Instances per bag (n+1)")->capture_default_str();
  app.add_option("--tags-per-image", a.tags, "Training tags per image, MIN,MAX")->capture_default_str();
  app.add_option("--test-tags-per-image", a.test_tags, "Test tags per image, MIN,MAX")->capture_default_str();
  app.add_option("--distractors-per-bag", a.distractors, "Distractor instances, MIN,MAX")->capture_default_str();
  app.add_option("--noise-sigma", a.cfg.noise_sigma, "Feature noise standard deviation")->capture_default_str();
  app.add_option("--label-noise-rate", a.cfg.label_noise_rate, "Probability of corrupting one tag")->capture_default_str();
  app.add_option("--distractor-max-cosine", a.cfg.distractor_max_cosine, "Cosine bound for distractors")->capture_default_str();
  app.add_option("--train-size", a.cfg.train_size, "Training bags")->capture_default_str();
  app.add_option("--test-size", a.cfg.test_size, "Test bags")->capture_default_str();
  app.add_flag("--test-includes-seen,!--test-unseen-only", a.cfg.test_includes_seen,
               "Test images may carry seen tags");
}

ordered_json synth_config_json(const SynthConfig& c) {
  return ordered_json{{"num_seen", c.num_seen},
                      {"num_unseen", c.num_unseen},
                      {"embed_dim", c.embed_dim},
                      {"feature_dim", c.feature_dim},
                      {"semantic_rank", c.semantic_rank},
                      {"semantic_residual", c.semantic_residual},
                      {"bag_size", c.bag_size},
                      {"tags_per_image", format_range(c.tags_per_image)},
                      {"test_tags_per_image", format_range(c.test_tags_per_image)},
                      {"distractors_per_bag", format_range(c.distractors_per_bag)},
                      {"noise_sigma", c.noise_sigma},
                      {"label_noise_rate", c.label_noise_rate},
                      {"distractor_max_cosine", c.distractor_max_cosine},
                      {"train_size", c.train_size},
                      {"test_size", c.test_size},
                      {"test_includes_seen", c.test_includes_seen},
                      {"seed", c.seed}};
}

int cmd_synth(SynthArgs& a, std::ostream& out) {
  a.cfg.tags_per_image = parse_range("--tags-per-image", a.tags);
  a.cfg.test_tags_per_image = parse_range("--test-tags-per-image", a.test_tags);
  a.cfg.distractors_per_bag = parse_range("--distractors-per-bag", a.distractors);
  try {
    validate(a.cfg);
  } catch (const ConfigError& e) {
    rethrow_with_flag(e);
  }
  const auto data = generate_synthetic(a.cfg);

  const fs::path dir = a.out;
  ensure_dir(dir);
  save_dataset(data.train, dir / "train.jsonl", dir / "seen.txt", dir / "unseen.txt");
  save_dataset(data.test, dir / "test.jsonl", dir / "seen.txt", dir / "unseen.txt");
  save_embeddings(data.table, dir / "embeddings.txt");
  {
    std::ostringstream mix;
    mix.precision(17);
    for (Eigen::Index r = 0; r < data.mixing.rows(); ++r) {
      for (Eigen::Index c = 0; c < data.mixing.cols(); ++c) {
        mix << (c ? " " : "") << data.mixing(r, c);
      }
      mix << '\n';
    }
    write_text(dir / "mixing.txt", mix.str());
  }
  write_manifest(dir / "manifest.json", "synth", a.cfg.seed, synth_config_json(a.cfg), ordered_json::object(),
                 ordered_json{{"train", "train.jsonl"}, {"test", "test.jsonl"},
                              {"embeddings", "embeddings.txt"}, {"seen", "seen.txt"},
                              {"unseen", "unseen.txt"}, {"mixing", "mixing.txt"}});
  out << "wrote " << data.train.bags.size() << " train and " << data.test.bags.size()
      << " test bags (" << a.cfg.num_seen << " seen, " << a.cfg.num_unseen
      << " unseen tags) to " << dir.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- shared model inputs

struct ModelInputs {
  std::string data_dir;
  std::string checkpoint;
  std::string embeddings;
  std::string seen;
  std::string unseen;
  std::size_t bag_size = 0;
  std::uint64_t seed = 1;

  void add(CLI::App& app, bool with_checkpoint) {
    app.add_option("--data-dir", data_dir, "Directory holding embeddings.txt, seen.txt, unseen.txt");
    if (with_checkpoint) app.add_option("--checkpoint", checkpoint, "Model checkpoint");
    app.add_option("--embeddings", embeddings, "Word vectors (GloVe text format)");
    app.add_option("--seen", seen, "Seen tag list");
    app.add_option("--unseen", unseen, "Unseen tag list");
    app.add_option("--bag-size", bag_size, "Use at most this many instances per bag (0 = all)")
        ->capture_default_str();
  }

  void resolve() {
    embeddings = data_file(embeddings, data_dir, "embeddings.txt");
    seen = data_file(seen, data_dir, "seen.txt");
    unseen = data_file(unseen, data_dir, "unseen.txt");
    require(embeddings, "--embeddings");
    require(seen, "--seen");
  }

  ordered_json inputs_json() const {
    ordered_json j{{"embeddings", embeddings}, {"seen", seen}, {"unseen", unseen}};
    if (!checkpoint.empty()) j["checkpoint"] = checkpoint;
    return j;
  }
};

// ---------------------------------------------------------------- train

struct TrainArgs {
  ModelInputs in;
  TrainConfig cfg;
  std::string train_path;
  std::string out;
  std::string pooling = "mean";
  bool verbose = false;
};

void add_train(CLI::App& app, TrainArgs& a) {
  a.in.add(app, false);
  app.add_option("--train", a.train_path, "Training bags (JSONL)");
  app.add_option("--out", a.out, "Output run directory")->required();
  app.add_option("--lr", a.cfg.learning_rate, "Adam learning rate")->capture_default_str();
  app.add_option("--beta1", a.cfg.beta1, "Adam beta1")->capture_default_str();
  app.add_option("--beta2", a.cfg.beta2, "Adam beta2")->capture_default_str();
  app.add_option("--epsilon", a.cfg.epsilon, "Adam epsilon")->capture_default_str();
  app.add_option("--iterations", a.cfg.iterations, "Updates (one bag each)")->capture_default_str();
  app.add_option("--hidden-dim", a.cfg.hidden_dim, "Hidden width H")->capture_default_str();
  app.add_option("--pooling", a.pooling, "mean|max")->capture_default_str();
  app.add_option("--seed", a.cfg.seed, "Initialization and shuffling seed")->capture_default_str();
  app.add_option("--log-every", a.cfg.log_every, "Loss window length")->capture_default_str();
  app.add_option("--checkpoint-every", a.cfg.checkpoint_every, "Intermediate checkpoint period (0 = off)")
      ->capture_default_str();
  app.add_flag("--verbose", a.verbose, "Print every loss window");
}

ordered_json train_config_json(const TrainConfig& c, std::size_t bag_size) {
  return ordered_json{{"lr", c.learning_rate},     {"beta1", c.beta1},
                      {"beta2", c.beta2},          {"epsilon", c.epsilon},
                      {"iterations", c.iterations}, {"hidden_dim", c.hidden_dim},
                      {"pooling", to_string(c.pooling)}, {"seed", c.seed},
                      {"log_every", c.log_every},  {"checkpoint_every", c.checkpoint_every},
                      {"bag_size", bag_size}};
}

int cmd_train(TrainArgs& a, std::ostream& out, std::ostream& err) {
  a.in.resolve();
  a.train_path = data_file(a.train_path, a.in.data_dir, "train.jsonl");
  require(a.train_path, "--train");
  a.cfg.pooling = parse_pooling(a.pooling);
  try {
    validate(a.cfg);
  } catch (const ConfigError& e) {
    rethrow_with_flag(e);
  }

  const bool have_unseen = !a.in.unseen.empty() && fs::exists(a.in.unseen);
  auto ds = load_dataset(a.train_path, a.in.seen, have_unseen ? a.in.unseen : "", Split::Train);
  if (a.in.bag_size > 0) ds.bags = limit_instances(std::move(ds.bags), a.in.bag_size);
  const auto table = load_normalized(a.in.embeddings, err);
  auto mats = build_matrix(table, ds.seen_tags, {});

  const fs::path dir = a.out;
  ensure_dir(dir);
  TrainHooks hooks;
  hooks.on_warning = [&](const std::string& m) { err << "warning: " << m << "\n"; };
  hooks.on_checkpoint = [&](std::size_t it, const ModelParams& p) {
    char name[48];
    std::snprintf(name, sizeof name, "checkpoint_%07zu.bin", it);
    save_checkpoint(p, dir / name);
  };
  if (a.verbose) {
    hooks.on_log = [&](const LossPoint& p) {
      out << "iteration " << p.iteration << " loss " << p.loss << "\n";
    };
  }
  const auto result = train(ds, std::move(mats.seen), a.cfg, hooks);

  save_checkpoint(result.params, dir / "model.bin");
  save_loss_curve(result.loss_curve, dir / "loss.csv");
  auto inputs = a.in.inputs_json();
  inputs["train"] = a.train_path;
  write_manifest(dir / "manifest.json", "train", a.cfg.seed, train_config_json(a.cfg, a.in.bag_size),
                 inputs, ordered_json{{"checkpoint", "model.bin"}, {"loss_curve", "loss.csv"}});

  char line[96];
  std::snprintf(line, sizeof line, "final running-mean loss: %.6g\n", result.loss_curve.back().loss);
  out << line;
  if (result.skipped_bags > 0) out << "skipped degenerate bags: " << result.skipped_bags << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- eval / predict

struct LoadedModel {
  ModelParams params;
  std::vector<std::string> seen;
  std::vector<std::string> unseen;
};

LoadedModel load_model(const ModelInputs& in, Task task, std::ostream& err) {
  require(in.checkpoint, "--checkpoint");
  const auto ckpt = load_checkpoint(in.checkpoint);
  LoadedModel m;
  m.seen = load_tag_list(in.seen);
  if (!in.unseen.empty() && fs::exists(in.unseen)) m.unseen = load_tag_list(in.unseen);
  if (ckpt.seen_count != m.seen.size()) {
    throw ConfigError("checkpoint was trained on " + std::to_string(ckpt.seen_count) +
                      " seen tags but --seen lists " + std::to_string(m.seen.size()));
  }
  if (task != Task::Conventional && m.unseen.empty()) {
    throw ConfigError(std::string("--task ") + std::string(to_string(task)) +
                      " requires a nonempty --unseen tag list");
  }
  const auto table = load_normalized(in.embeddings, err);
  auto mats = build_matrix(table, m.seen, m.unseen);
  m.params = restore_params(ckpt, std::move(mats.extended));
  return m;
}

struct EvalArgs {
  ModelInputs in;
  std::string test_path;
  std::string task = "zst";
  std::string ks = "3,5";
  std::string report_path;
  std::size_t baseline_trials = 0;
};

void add_eval(CLI::App& app, EvalArgs& a) {
  a.in.add(app, true);
  app.add_option("--test", a.test_path, "Test bags (JSONL)");
  app.add_option("--task", a.task, "conventional|zst|gzst|zsr")->capture_default_str();
  app.add_option("--k", a.ks, "Comma-separated K values")->capture_default_str();
  app.add_option("--report-path", a.report_path,
                 "Write the text report here (plus .jsonl records and .manifest.json)");
  app.add_option("--baseline-trials", a.baseline_trials,
                 "Also estimate the random-ranking MiAP with this many trials (>= 100)");
  app.add_option("--seed", a.in.seed, "Seed for the random baseline")->capture_default_str();
}

int cmd_eval(EvalArgs& a, std::ostream& out, std::ostream& err) {
  a.in.resolve();
  a.test_path = data_file(a.test_path, a.in.data_dir, "test.jsonl");
  require(a.test_path, "--test");
  const Task task = parse_task(a.task);
  const auto ks = parse_ks(a.ks);

  auto model = load_model(a.in, task, err);
  auto test = load_dataset(a.test_path, a.in.seen, a.in.unseen, Split::Test);
  if (a.in.bag_size > 0) test.bags = limit_instances(std::move(test.bags), a.in.bag_size);

  const auto report = evaluate(model.params, test, task, ks);
  const auto names = model.params.semantic.tags();
  std::string text = format_report_text(report, names);
  if (a.baseline_trials > 0) {
    const auto base = random_baseline(test, task, a.baseline_trials, a.in.seed);
    char buf[128];
    std::snprintf(buf, sizeof buf, "random_baseline_miap: %.4f\nrandom_baseline_stddev: %.4f\n",
                  base.mean, base.stddev);
    text += buf;
  }
  out << text;

  if (!a.report_path.empty()) {
    const fs::path p = a.report_path;
    if (p.has_parent_path()) ensure_dir(p.parent_path());
    write_text(p, text);
    write_text(p.string() + ".jsonl", format_report_jsonl(report, names));
    auto inputs = a.in.inputs_json();
    inputs["test"] = a.test_path;
    write_manifest(p.string() + ".manifest.json", "eval", a.in.seed,
                   ordered_json{{"task", a.task}, {"k", a.ks}, {"bag_size", a.in.bag_size},
                                {"baseline_trials", a.baseline_trials}},
                   inputs,
                   ordered_json{{"report", p.filename().string()},
                                {"records", p.filename().string() + ".jsonl"}});
  }
  return kExitOk;
}

struct PredictArgs {
  ModelInputs in;
  std::string bags_path;
  std::string task = "gzst";
  std::size_t k = 5;
  std::string output;
};

void add_predict(CLI::App& app, PredictArgs& a) {
  a.in.add(app, true);
  app.add_option("--bags", a.bags_path, "Bags to tag (JSONL; tags optional)")->required();
  app.add_option("--task", a.task, "conventional|zst|gzst|zsr")->capture_default_str();
  app.add_option("--k", a.k, "Tags per bag")->capture_default_str();
  app.add_option("--output", a.output, "Write predictions here instead of stdout");
  app.add_option("--seed", a.in.seed, "Recorded in the manifest")->capture_default_str();
}

int cmd_predict(PredictArgs& a, std::ostream& out, std::ostream& err) {
  a.in.resolve();
  const Task task = parse_task(a.task);
  auto model = load_model(a.in, task, err);
  auto bags = load_bags(a.bags_path);
  if (a.in.bag_size > 0) bags = limit_instances(std::move(bags), a.in.bag_size);

  const auto& names = model.params.semantic.tags();
  std::string text;
  char buf[64];
  for (const auto& bag : bags) {
    const auto trace = forward(model.params, bag);
    const auto top = predict_topk(trace.bag_scores, task, a.k, model.seen.size());
    text += "# " + bag.id + "\n";
    for (auto t : top) {
      std::snprintf(buf, sizeof buf, "\t%.6f\n", trace.bag_scores[static_cast<Eigen::Index>(t)]);
      text += names[t] + buf;
    }
  }
  if (a.output.empty()) {
    out << text;
  } else {
    write_text(a.output, text);
    auto inputs = a.in.inputs_json();
    inputs["bags"] = a.bags_path;
    write_manifest(a.output + ".manifest.json", "predict", a.in.seed,
                   ordered_json{{"task", a.task}, {"k", a.k}, {"bag_size", a.in.bag_size}}, inputs,
                   ordered_json{{"predictions", fs::path(a.output).filename().string()}});
  }
  return kExitOk;
}

// ---------------------------------------------------------------- gradcheck

struct GradcheckArgs {
  GradCheckOptions opts;
  std::string pooling = "both";
};

void add_gradcheck(CLI::App& app, GradcheckArgs& a) {
  app.add_option("--trials", a.opts.trials, "Random configurations")->capture_default_str();
  app.add_option("--seed", a.opts.seed, "Seed of the first configuration")->capture_default_str();
  app.add_option("--pooling", a.pooling, "mean|max|both")->capture_default_str();
  app.add_option("--step", a.opts.step, "Central-difference step h")->capture_default_str();
  app.add_option("--tolerance", a.opts.tolerance, "Maximum relative error")->capture_default_str();
  app.add_flag("--allow-ties", a.opts.allow_ties,
               "Place every case on a ReLU kink (shows the nondifferentiable failure mode)");
}

int cmd_gradcheck(GradcheckArgs& a, std::ostream& out, std::ostream& err) {
  if (a.pooling == "both") {
    a.opts.poolings = {Pooling::Mean, Pooling::Max};
  } else {
    a.opts.poolings = {parse_pooling(a.pooling)};
  }
  if (!(a.opts.step > 0.0)) throw ConfigError("--step must be positive");
  const auto report = run_gradient_check(a.opts);
  const auto& w = report.trials[report.worst];
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "trials: %zu\nmax relative error: %.3e\nworst: seed %llu pooling %s "
                "D=%zu H=%zu d=%zu S=%zu instances=%zu\n",
                report.trials.size(), report.max_rel_error,
                static_cast<unsigned long long>(w.seed), std::string(to_string(w.pooling)).c_str(),
                w.D, w.H, w.d, w.S, w.instances);
  out << buf;
  if (!report.passed) {
    out << "result: FAIL\n";
    err << "gradient check failed: relative error " << report.max_rel_error << " >= "
        << a.opts.tolerance << " for seed " << w.seed << "\n";
    return kExitFailure;
  }
  out << "result: PASS\n";
  return kExitOk;
}

int exit_code_for(const Error& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const MissingVectorError*>(&e) ||
      dynamic_cast<const ParseError*>(&e) || dynamic_cast<const DatasetError*>(&e) ||
      dynamic_cast<const ShapeError*>(&e)) {
    return kExitUsage;
  }
  return kExitFailure;
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  try {
    args = expand_config(raw_args);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  CLI::App app{"Multiple-instance zero-shot image tagging head"};
  app.name(args.empty() ? "miltag" : fs::path(args[0]).filename().string());
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  app.add_option("--config", "key = value settings file; explicit flags take precedence");

  SynthArgs synth;
  TrainArgs train_args;
  EvalArgs eval_args;
  PredictArgs predict_args;
  GradcheckArgs grad;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset");
  auto* train_cmd = app.add_subcommand("train", "Train the MIL head");
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a test set");
  auto* predict_cmd = app.add_subcommand("predict", "Print top-K tags for bags");
  auto* grad_cmd = app.add_subcommand("gradcheck", "Compare backprop against finite differences");
  for (auto* sub : {synth_cmd, train_cmd, eval_cmd, predict_cmd, grad_cmd}) {
    sub->add_option("--config", "key = value settings file; explicit flags take precedence");
  }
  add_synth(*synth_cmd, synth);
  add_train(*train_cmd, train_args);
  add_eval(*eval_cmd, eval_args);
  add_predict(*predict_cmd, predict_args);
  add_gradcheck(*grad_cmd, grad);

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (*synth_cmd) return cmd_synth(synth, out);
    if (*train_cmd) return cmd_train(train_args, out, err);
    if (*eval_cmd) return cmd_eval(eval_args, out, err);
    if (*predict_cmd) return cmd_predict(predict_args, out, err);
    if (*grad_cmd) return cmd_gradcheck(grad, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace miltag::cli
