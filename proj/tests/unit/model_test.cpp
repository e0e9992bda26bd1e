#include <algorithm>

#include <gtest/gtest.h>

#include "miltag/error.hpp"
#include "miltag/model.hpp"
#include "random_model.hpp"

using namespace miltag;
using miltag::testing::random_matrix;
using miltag::testing::random_params;

namespace {

ModelParams identity_params(Eigen::Index n) {
  ModelParams p;
  p.head.W1 = Eigen::MatrixXd::Identity(n, n);
  p.head.b1 = Eigen::VectorXd::Zero(n);
  p.head.W2 = Eigen::MatrixXd::Identity(n, n);
  p.head.b2 = Eigen::VectorXd::Zero(n);
  std::vector<std::string> tags;
  for (Eigen::Index i = 0; i < n; ++i) tags.push_back("t" + std::to_string(i));
  p.semantic = SemanticMatrix(tags, Eigen::MatrixXd::Identity(n, n));
  return p;
}

}  // namespace

TEST(Forward, IdentityNetworkPassesNonnegativeInput) {
  Eigen::MatrixXd f(3, 1);
  f << 0.5, 2.0, 0.0;
  const auto trace = forward(identity_params(3), f);
  EXPECT_EQ(trace.instance_scores, f);
  EXPECT_EQ(trace.bag_scores, f.col(0));
}

TEST(Forward, ReluClampsNegatives) {
  Eigen::MatrixXd f(2, 1);
  f << -1.0, 2.0;
  const auto trace = forward(identity_params(2), f);
  EXPECT_EQ(trace.hidden(0, 0), 0.0);
  EXPECT_EQ(trace.hidden(1, 0), 2.0);
  EXPECT_EQ(trace.bag_scores, Eigen::Vector2d(0.0, 2.0));
}

// Element-by-element loops over the same formulas, sharing no code with
// the Eigen expressions in forward().
TEST(Forward, MatchesLoopEvaluation) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    for (Pooling pooling : {Pooling::Mean, Pooling::Max}) {
      const auto p = random_params(rng, 3, 4, 2, 2, pooling);
      const Eigen::MatrixXd f = random_matrix(rng, 3, 2, 2.0);
      const auto trace = forward(p, f);

      std::vector<double> bag(2, pooling == Pooling::Max ? -1e300 : 0.0);
      for (int i = 0; i < 2; ++i) {
        double hidden[4];
        for (int h = 0; h < 4; ++h) {
          double acc = p.head.b1(h);
          for (int k = 0; k < 3; ++k) acc += p.head.W1(h, k) * f(k, i);
          hidden[h] = acc > 0 ? acc : 0.0;
        }
        double fp[2];
        for (int e = 0; e < 2; ++e) {
          fp[e] = p.head.b2(e);
          for (int h = 0; h < 4; ++h) fp[e] += p.head.W2(e, h) * hidden[h];
        }
        for (int t = 0; t < 2; ++t) {
          double s = 0;
          for (int e = 0; e < 2; ++e) s += p.semantic.columns()(e, t) * fp[e];
          EXPECT_NEAR(trace.instance_scores(t, i), s, 1e-12);
          bag[static_cast<std::size_t>(t)] =
              pooling == Pooling::Max ? std::max(bag[static_cast<std::size_t>(t)], s)
                                      : bag[static_cast<std::size_t>(t)] + s / 2.0;
        }
      }
      EXPECT_NEAR(trace.bag_scores(0), bag[0], 1e-12);
      EXPECT_NEAR(trace.bag_scores(1), bag[1], 1e-12);
    }
  }
}

TEST(Forward, RejectsWrongFeatureDimAndNonFinite) {
  Rng rng(1);
  const auto p = random_params(rng, 3, 4, 2, 2);
  EXPECT_THROW(forward(p, Eigen::MatrixXd::Zero(4, 2)), ShapeError);
  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(3, 2);
  f(1, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(forward(p, f), NumericError);
  EXPECT_THROW(forward(p, Eigen::MatrixXd::Zero(3, 0)), ShapeError);
}

TEST(Forward, IsPure) {
  Rng rng(2);
  const auto p = random_params(rng, 5, 6, 3, 4, Pooling::Max);
  const Eigen::MatrixXd f = random_matrix(rng, 5, 3);
  const auto a = forward(p, f);
  const auto b = forward(p, f);
  EXPECT_EQ(a.instance_scores, b.instance_scores);
  EXPECT_EQ(a.bag_scores, b.bag_scores);
  EXPECT_EQ(a.argmax_instance, b.argmax_instance);
}

TEST(Pool, TwoInstanceHandCase) {
  Eigen::MatrixXd s(2, 2);
  s << 1, 3,
       2, 0;
  const auto mx = pool(s, Pooling::Max);
  EXPECT_EQ(mx.scores, Eigen::Vector2d(3, 2));
  EXPECT_EQ(mx.argmax, (std::vector<Eigen::Index>{1, 0}));
  EXPECT_EQ(pool(s, Pooling::Mean).scores, Eigen::Vector2d(2, 1));
}

TEST(Pool, SingleInstanceAndTies) {
  Eigen::MatrixXd one(3, 1);
  one << 1, -2, 4;
  EXPECT_EQ(pool(one, Pooling::Max).scores, one.col(0));
  EXPECT_EQ(pool(one, Pooling::Mean).scores, one.col(0));

  Eigen::MatrixXd tie(1, 2);
  tie << 5, 5;
  EXPECT_EQ(pool(tie, Pooling::Max).argmax[0], 0);
  EXPECT_THROW(pool(Eigen::MatrixXd(2, 0), Pooling::Mean), ShapeError);
}

TEST(Pool, SymmetricUnderColumnPermutationAndDuplication) {
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const auto n = static_cast<Eigen::Index>(rng.between(1, 6));
    const Eigen::MatrixXd s = random_matrix(rng, 4, n, 3.0);
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    rng.shuffle(perm);
    Eigen::MatrixXd permuted(4, n), doubled(4, 2 * n);
    for (Eigen::Index i = 0; i < n; ++i) permuted.col(i) = s.col(perm[static_cast<std::size_t>(i)]);
    doubled << s, s;
    for (Pooling mode : {Pooling::Mean, Pooling::Max}) {
      EXPECT_TRUE(pool(permuted, mode).scores.isApprox(pool(s, mode).scores, 1e-14));
      EXPECT_TRUE(pool(doubled, mode).scores.isApprox(pool(s, mode).scores, 1e-14));
    }
    EXPECT_TRUE(((pool(s, Pooling::Max).scores - pool(s, Pooling::Mean).scores).array() >= -1e-15).all());
  }
}

TEST(Forward, SeenScoresUnchangedByAppendingUnseenColumns) {
  Rng rng(3);
  const auto p = random_params(rng, 4, 5, 3, 3);
  const auto extra = miltag::testing::random_semantic(rng, 3, 2, "u");
  Eigen::MatrixXd cols(3, 5);
  cols << p.semantic.columns(), extra.columns();
  auto names = p.semantic.tags();
  names.insert(names.end(), extra.tags().begin(), extra.tags().end());
  const auto wide = with_semantic(p, SemanticMatrix(names, cols));

  const Eigen::MatrixXd f = random_matrix(rng, 4, 3);
  const auto narrow_scores = forward(p, f).bag_scores;
  const auto wide_scores = forward(wide, f).bag_scores;
  ASSERT_EQ(wide_scores.size(), 5);
  EXPECT_EQ(wide_scores.head(3), narrow_scores);
}

TEST(WithSemantic, RejectsDimensionMismatch) {
  Rng rng(4);
  const auto p = random_params(rng, 4, 5, 3, 3);
  EXPECT_THROW(with_semantic(p, miltag::testing::random_semantic(rng, 2, 3)), ShapeError);
}

TEST(PredictTopk, HandCases) {
  const Eigen::Vector3d s(0.9, 0.1, 0.5);
  EXPECT_EQ(predict_topk(s, Task::ZST, 1, 2), std::vector<std::size_t>{2});
  EXPECT_EQ(predict_topk(s, Task::GZST, 2, 2), (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(predict_topk(s, Task::Conventional, 2, 2), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(predict_topk(s, Task::ZSR, 5, 2), std::vector<std::size_t>{2});
  EXPECT_THROW(predict_topk(s, Task::ZST, 2, 2), ConfigError);
  EXPECT_THROW(predict_topk(s, Task::GZST, 0, 2), ConfigError);
}

TEST(PredictTopk, TiesBreakByAscendingIndex) {
  const Eigen::VectorXd s = Eigen::VectorXd::Constant(5, 1.0);
  EXPECT_EQ(rank_tags(s, Task::GZST, 2), (std::vector<std::size_t>{0, 1, 2, 3, 4}));
  EXPECT_EQ(rank_tags(s, Task::ZST, 2), (std::vector<std::size_t>{2, 3, 4}));
}

TEST(PredictTopk, SeenDominatedScoresFillGzstWithSeenTags) {
  Eigen::VectorXd s(6);
  s << 10, 9, 8, 0.3, 0.2, 0.1;
  const auto top = predict_topk(s, Task::GZST, 3, 3);
  EXPECT_TRUE(std::all_of(top.begin(), top.end(), [](std::size_t i) { return i < 3; }));
}

TEST(ParseEnums, RoundTrip) {
  for (Task t : {Task::Conventional, Task::ZST, Task::GZST, Task::ZSR}) {
    EXPECT_EQ(parse_task(to_string(t)), t);
  }
  for (Pooling p : {Pooling::Mean, Pooling::Max}) EXPECT_EQ(parse_pooling(to_string(p)), p);
  EXPECT_THROW(parse_task("bogus"), ConfigError);
}
