#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "../../tools/cli/commands.hpp"
#include "miltag/checkpoint.hpp"
#include "miltag/dataset.hpp"
#include "miltag/embeddings.hpp"
#include "miltag/trainer.hpp"
#include "test_paths.hpp"

namespace fs = std::filesystem;
using miltag::testing::slurp;
using miltag::testing::write;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "miltag");
  std::ostringstream out, err;
  const int code = miltag::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

// Small dataset and a briefly trained model shared by several tests.
class CliPipeline : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = miltag::testing::scratch_dir();
    data_ = (dir_ / "data").string();
    run_ = (dir_ / "run").string();
    auto r = invoke({"synth", "--out", data_, "--train-size", "40", "--test-size", "20"});
    ASSERT_EQ(r.code, 0) << r.err;
    r = invoke({"train", "--data-dir", data_, "--out", run_, "--iterations", "50",
                "--hidden-dim", "16", "--lr", "1e-3", "--log-every", "10"});
    ASSERT_EQ(r.code, 0) << r.err;
  }

  std::string model() const { return (fs::path(run_) / "model.bin").string(); }

  fs::path dir_;
  std::string data_, run_;
};

}  // namespace

TEST(Cli, HelpAndVersion) {
  auto r = invoke({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("synth"), std::string::npos);
  r = invoke({"--version"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find(miltag::cli::kVersion), std::string::npos);
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(invoke({}).code, 2);
  EXPECT_EQ(invoke({"frobnicate"}).code, 2);
  EXPECT_EQ(invoke({"synth"}).code, 2);  // --out missing
  const auto dir = miltag::testing::scratch_dir();
  const auto r = invoke({"synth", "--out", dir.string(), "--num-seen", "0"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("--num-seen"), std::string::npos) << r.err;
  EXPECT_EQ(invoke({"synth", "--out", dir.string(), "--tags-per-image", "x"}).code, 2);
}

TEST(Cli, SynthWritesAllArtifacts) {
  const auto dir = miltag::testing::scratch_dir();
  const auto r = invoke({"synth", "--out", dir.string(), "--train-size", "5", "--test-size", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"train.jsonl", "test.jsonl", "embeddings.txt", "seen.txt", "unseen.txt",
                        "mixing.txt", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(manifest["command"], "synth");
  EXPECT_EQ(manifest["config"]["train_size"], 5);
  EXPECT_EQ(manifest["seed"], 7);
}

TEST(Cli, ConfigFileWithFlagOverride) {
  const auto dir = miltag::testing::scratch_dir();
  write(dir / "synth.cfg", "# sizes\ntrain_size = 4\ntest-size = 2\nseed = 99\n");
  const auto r = invoke({"synth", "--config", (dir / "synth.cfg").string(), "--out",
                         (dir / "d").string(), "--seed", "5"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto manifest = nlohmann::json::parse(slurp(dir / "d" / "manifest.json"));
  EXPECT_EQ(manifest["config"]["train_size"], 4);
  EXPECT_EQ(manifest["config"]["test_size"], 2);
  EXPECT_EQ(manifest["seed"], 5);

  write(dir / "bad.cfg", "no equals sign\n");
  EXPECT_EQ(invoke({"synth", "--config", (dir / "bad.cfg").string(), "--out", "x"}).code, 2);
  EXPECT_EQ(invoke({"synth", "--config", (dir / "missing.cfg").string(), "--out", "x"}).code, 2);
}

TEST_F(CliPipeline, TrainOutputs) {
  EXPECT_TRUE(fs::exists(model()));
  const auto curve = slurp(fs::path(run_) / "loss.csv");
  EXPECT_EQ(curve.rfind("iteration,loss\n", 0), 0u);
  EXPECT_EQ(std::count(curve.begin(), curve.end(), '\n'), 6);
  const auto manifest = nlohmann::json::parse(slurp(fs::path(run_) / "manifest.json"));
  EXPECT_EQ(manifest["config"]["lr"], 1e-3);
  EXPECT_EQ(manifest["config"]["iterations"], 50);
  EXPECT_EQ(miltag::load_checkpoint(model()).head.W1.rows(), 16);
}

TEST_F(CliPipeline, EvalEveryTask) {
  for (const char* task : {"zst", "gzst", "zsr"}) {
    const auto r = invoke({"eval", "--data-dir", data_, "--checkpoint", model(), "--task", task});
    ASSERT_EQ(r.code, 0) << task << ": " << r.err;
    EXPECT_NE(r.out.find("miap: "), std::string::npos);
  }
  // Unseen-only test images leave nothing for the conventional task.
  const auto conv = invoke({"eval", "--data-dir", data_, "--checkpoint", model(), "--task",
                            "conventional"});
  EXPECT_EQ(conv.code, 1);
  EXPECT_NE(conv.err.find("skipped"), std::string::npos) << conv.err;
}

TEST_F(CliPipeline, EvalReportFilesAndBaseline) {
  const auto report = (dir_ / "reports" / "zst.txt").string();
  const auto r = invoke({"eval", "--data-dir", data_, "--checkpoint", model(), "--report-path",
                         report, "--baseline-trials", "100"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(report), r.out);
  EXPECT_NE(r.out.find("random_baseline_miap: "), std::string::npos);
  EXPECT_TRUE(fs::exists(report + ".jsonl"));
  const auto manifest = nlohmann::json::parse(slurp(report + ".manifest.json"));
  EXPECT_EQ(manifest["command"], "eval");
}

TEST_F(CliPipeline, PredictTopK) {
  const auto r = invoke({"predict", "--data-dir", data_, "--checkpoint", model(), "--bags",
                         (fs::path(data_) / "test.jsonl").string(), "--k", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream lines(r.out);
  std::string line;
  std::size_t headers = 0, rows = 0;
  while (std::getline(lines, line)) {
    if (line.rfind("# ", 0) == 0) {
      ++headers;
    } else {
      ++rows;
      EXPECT_NE(line.find('\t'), std::string::npos);
    }
  }
  EXPECT_EQ(headers, 20u);
  EXPECT_EQ(rows, 60u);

  const auto zsr = invoke({"predict", "--data-dir", data_, "--checkpoint", model(), "--bags",
                           (fs::path(data_) / "test.jsonl").string(), "--task", "zsr"});
  ASSERT_EQ(zsr.code, 0);
  EXPECT_EQ(std::count(zsr.out.begin(), zsr.out.end(), '\n'), 40);
}

TEST_F(CliPipeline, MissingWordVectorIsUsageError) {
  write(dir_ / "unseen_extra.txt", slurp(fs::path(data_) / "unseen.txt") + "no_such_tag\n");
  const auto r = invoke({"eval", "--data-dir", data_, "--checkpoint", model(), "--unseen",
                         (dir_ / "unseen_extra.txt").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("no_such_tag"), std::string::npos) << r.err;
}

TEST_F(CliPipeline, CheckpointSeenCountMismatch) {
  write(dir_ / "seen_short.txt", "seen_00\nseen_01\n");
  const auto r = invoke({"eval", "--data-dir", data_, "--checkpoint", model(), "--seen",
                         (dir_ / "seen_short.txt").string()});
  EXPECT_EQ(r.code, 2);
}

TEST_F(CliPipeline, CorruptCheckpoint) {
  write(dir_ / "junk.bin", "not a checkpoint");
  const auto r = invoke({"eval", "--data-dir", data_, "--checkpoint", (dir_ / "junk.bin").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("magic"), std::string::npos) << r.err;
}

TEST(Cli, GradcheckPassesAndReportsFailure) {
  auto r = invoke({"gradcheck", "--trials", "10"});
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("result: PASS"), std::string::npos);

  r = invoke({"gradcheck", "--trials", "10", "--allow-ties"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("result: FAIL"), std::string::npos);

  EXPECT_EQ(invoke({"gradcheck", "--step", "0"}).code, 2);
}

TEST(Cli, SynthIsByteIdenticalAcrossRuns) {
  const auto dir = miltag::testing::scratch_dir();
  for (const char* sub : {"a", "b"}) {
    ASSERT_EQ(invoke({"synth", "--seed", "7", "--out", (dir / sub).string(), "--train-size", "10",
                      "--test-size", "5"}).code, 0);
  }
  for (const char* f : {"train.jsonl", "test.jsonl", "embeddings.txt", "seen.txt", "unseen.txt",
                        "mixing.txt", "manifest.json"}) {
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  }
  EXPECT_EQ(slurp(dir / "a" / "seen.txt").size(), 10u * 8u);
}

TEST_F(CliPipeline, PoolingModeReachesCheckpoint) {
  const auto max_run = (dir_ / "max").string();
  ASSERT_EQ(invoke({"train", "--data-dir", data_, "--out", max_run, "--iterations", "50",
                    "--hidden-dim", "16", "--lr", "1e-3", "--pooling", "max"}).code, 0);
  const auto mean = miltag::load_checkpoint(model());
  const auto max = miltag::load_checkpoint(fs::path(max_run) / "model.bin");
  EXPECT_EQ(max.pooling, miltag::Pooling::Max);
  EXPECT_NE(mean.head, max.head);
  EXPECT_EQ(invoke({"train", "--data-dir", data_, "--out", max_run, "--pooling", "median"}).code, 2);
}

TEST_F(CliPipeline, ZeroLearningRateKeepsInitialParams) {
  const auto still = (dir_ / "still").string();
  ASSERT_EQ(invoke({"train", "--data-dir", data_, "--out", still, "--iterations", "20",
                    "--hidden-dim", "16", "--lr", "0", "--seed", "4"}).code, 0);
  const auto seen = miltag::load_tag_list(fs::path(data_) / "seen.txt");
  const auto table = miltag::normalize_table(
      miltag::load_embeddings(fs::path(data_) / "embeddings.txt").table);
  const auto init = miltag::init_params(32, 16, miltag::build_matrix(table, seen, {}).seen,
                                        miltag::Pooling::Mean, 4);
  EXPECT_EQ(miltag::load_checkpoint(fs::path(still) / "model.bin").head, init.head);
}

TEST_F(CliPipeline, NonFiniteLossNamesBag) {
  const auto huge = dir_ / "huge.jsonl";
  std::string data;
  for (int i = 0; i < 32 * 2; ++i) data += (i ? "," : "") + std::string("1.7e308");
  write(huge, R"({"id":"boom","rows":32,"cols":2,"data":[)" + data + R"(],"tags":["seen_00"]})" "\n");
  const auto r = invoke({"train", "--data-dir", data_, "--train", huge.string(), "--out",
                         (dir_ / "boom").string(), "--iterations", "3", "--hidden-dim", "8"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("boom"), std::string::npos) << r.err;
}

TEST_F(CliPipeline, EvalLeavesCheckpointUntouched) {
  const auto before = slurp(model());
  ASSERT_EQ(invoke({"eval", "--data-dir", data_, "--checkpoint", model()}).code, 0);
  EXPECT_EQ(slurp(model()), before);
}

TEST_F(CliPipeline, PredictScoresNonIncreasingAndKBound) {
  const auto one = dir_ / "one.jsonl";
  std::string first;
  std::getline(std::istringstream(slurp(fs::path(data_) / "test.jsonl")) >> std::ws, first);
  write(one, first + "\n");
  const auto r = invoke({"predict", "--data-dir", data_, "--checkpoint", model(), "--bags",
                         one.string(), "--k", "4", "--task", "gzst"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream lines(r.out);
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line.rfind("# test_", 0), 0u);
  double prev = std::numeric_limits<double>::infinity();
  int rows = 0;
  while (std::getline(lines, line)) {
    const double score = std::stod(line.substr(line.find('\t') + 1));
    EXPECT_LE(score, prev);
    prev = score;
    ++rows;
  }
  EXPECT_EQ(rows, 4);

  const auto too_many = invoke({"predict", "--data-dir", data_, "--checkpoint", model(), "--bags",
                                one.string(), "--k", "6", "--task", "zst"});
  EXPECT_EQ(too_many.code, 2);
}
