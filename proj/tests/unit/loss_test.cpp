#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "miltag/error.hpp"
#include "miltag/loss.hpp"
#include "random_model.hpp"

using namespace miltag;
using miltag::testing::random_matrix;
using miltag::testing::random_params;

namespace {

// Direct transcription of the pairwise formula, using the naive softplus.
double naive_loss(const Eigen::VectorXd& o, const std::vector<std::size_t>& pos) {
  double sum = 0.0;
  std::size_t pairs = 0;
  for (Eigen::Index n = 0; n < o.size(); ++n) {
    if (std::find(pos.begin(), pos.end(), static_cast<std::size_t>(n)) != pos.end()) continue;
    for (auto p : pos) {
      sum += std::log(1.0 + std::exp(o(n) - o(static_cast<Eigen::Index>(p))));
      ++pairs;
    }
  }
  return sum / static_cast<double>(pairs);
}

}  // namespace

TEST(TagLoss, HandValues) {
  const std::vector<std::size_t> first{0};
  EXPECT_NEAR(tag_loss(Eigen::Vector2d(0.5, 0.5), first).value, std::log(2.0), 1e-12);

  const double two_margin = std::log1p(std::exp(-2.0));
  EXPECT_NEAR(two_margin, 0.126928, 5e-7);
  EXPECT_NEAR(tag_loss(Eigen::Vector2d(2.0, 0.0), first).value, two_margin, 1e-12);

  const std::vector<std::size_t> two{0, 1};
  const auto three = tag_loss(Eigen::Vector3d(1.0, 1.0, 0.0), two);
  EXPECT_EQ(three.num_pairs, 2u);
  const double one_margin = std::log1p(std::exp(-1.0));
  EXPECT_NEAR(one_margin, 0.313262, 5e-7);
  EXPECT_NEAR(three.value, one_margin, 1e-12);
}

TEST(TagLoss, DegenerateBags) {
  const Eigen::Vector3d o(1, 2, 3);
  EXPECT_THROW(tag_loss(o, std::vector<std::size_t>{}), DegenerateBagError);
  EXPECT_THROW(tag_loss(o, std::vector<std::size_t>{0, 1, 2}), DegenerateBagError);
}

TEST(Softplus, StableAtExtremes) {
  EXPECT_EQ(softplus(1000.0), 1000.0);
  EXPECT_GT(softplus(-1000.0), -1e-300);
  EXPECT_NEAR(softplus(-40.0), std::exp(-40.0), 1e-30);
  EXPECT_TRUE(std::isfinite(tag_loss(Eigen::Vector2d(-800, 800), std::vector<std::size_t>{0}).value));
}

TEST(TagLoss, MatchesNaiveFormulaAndProperties) {
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const auto S = static_cast<Eigen::Index>(rng.between(2, 8));
    const Eigen::VectorXd o = random_matrix(rng, S, 1, 3.0);
    std::vector<std::size_t> pos;
    for (Eigen::Index t = 0; t < S; ++t) {
      if (rng.bernoulli(0.4)) pos.push_back(static_cast<std::size_t>(t));
    }
    if (pos.empty()) pos.push_back(0);
    if (pos.size() == static_cast<std::size_t>(S)) pos.pop_back();

    const double value = tag_loss(o, pos).value;
    EXPECT_NEAR(value, naive_loss(o, pos), 1e-12);
    EXPECT_GT(value, 0.0);

    // Shift invariance.
    const Eigen::VectorXd shifted = o.array() + rng.uniform(-5, 5);
    EXPECT_NEAR(tag_loss(shifted, pos).value, value, 1e-12);

    // Monotone in positive and negative scores.
    Eigen::VectorXd up = o;
    up(static_cast<Eigen::Index>(pos[0])) += 0.1;
    EXPECT_LT(tag_loss(up, pos).value, value);
    std::size_t neg = 0;
    while (std::find(pos.begin(), pos.end(), neg) != pos.end()) ++neg;
    up = o;
    up(static_cast<Eigen::Index>(neg)) += 0.1;
    EXPECT_GT(tag_loss(up, pos).value, value);

    // Relabelling tags together with the positives.
    std::vector<std::size_t> perm(static_cast<std::size_t>(S));
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    Eigen::VectorXd permuted(S);
    for (Eigen::Index t = 0; t < S; ++t) permuted(static_cast<Eigen::Index>(perm[static_cast<std::size_t>(t)])) = o(t);
    std::vector<std::size_t> ppos;
    for (auto p : pos) ppos.push_back(perm[p]);
    EXPECT_NEAR(tag_loss(permuted, ppos).value, value, 1e-12);
  }
}

TEST(TagLossGradient, MatchesCentralDifferences) {
  Rng rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::VectorXd o = random_matrix(rng, 5, 1, 2.0);
    const std::vector<std::size_t> pos{1, 3};
    const Eigen::VectorXd g = tag_loss_gradient(o, pos);
    for (Eigen::Index t = 0; t < 5; ++t) {
      Eigen::VectorXd a = o, b = o;
      a(t) += 1e-6;
      b(t) -= 1e-6;
      EXPECT_NEAR(g(t), (tag_loss(a, pos).value - tag_loss(b, pos).value) / 2e-6, 1e-8);
    }
    EXPECT_NEAR(g.sum(), 0.0, 1e-14);
  }
}

TEST(DatasetLoss, MeanOverValidBagsSkippingDegenerate) {
  Rng rng(4);
  const auto p = random_params(rng, 3, 4, 2, 3);
  Bag a{"a", random_matrix(rng, 3, 2), {"t0"}};
  Bag b{"b", random_matrix(rng, 3, 3), {"t1", "t2"}};
  Bag all{"c", random_matrix(rng, 3, 1), {"t0", "t1", "t2"}};
  const double la = tag_loss(forward(p, a).bag_scores, std::vector<std::size_t>{0}).value;
  const double lb = tag_loss(forward(p, b).bag_scores, std::vector<std::size_t>{1, 2}).value;

  const std::vector<Bag> bags{a, all, b};
  const auto result = dataset_loss(p, bags);
  EXPECT_NEAR(result.value, (la + lb) / 2.0, 1e-15);
  EXPECT_EQ(result.evaluated, 2u);
  EXPECT_EQ(result.skipped, 1u);

  const std::vector<Bag> only_bad{all};
  EXPECT_THROW(dataset_loss(p, only_bad), DegenerateBagError);
}

TEST(Backward, SpecExampleMatchesFiniteDifferences) {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = random_params(rng, 3, 4, 2, 3, Pooling::Mean);
    const Eigen::MatrixXd f = random_matrix(rng, 3, 2, 2.0);
    const std::vector<std::size_t> pos{0, 2};
    const auto analytic = backward(p, forward(p, f), pos);
    const auto numeric = finite_diff_grad(p, f, pos, 1e-5);
    EXPECT_LT(max_relative_error(analytic, numeric), 1e-4) << "trial " << trial;
  }
}

TEST(Backward, ZeroUpstreamGivesZeroGradients) {
  Rng rng(2);
  const auto p = random_params(rng, 3, 4, 2, 3, Pooling::Max);
  const auto trace = forward(p, random_matrix(rng, 3, 2));
  const auto g = backward_from_scores(p, trace, Eigen::VectorXd::Zero(3));
  EXPECT_TRUE(g.W1.isZero(0) && g.b1.isZero(0) && g.W2.isZero(0) && g.b2.isZero(0));
}

TEST(Backward, PoolingModesAgreeOnSingleInstance) {
  Rng rng(3);
  auto mean = random_params(rng, 4, 5, 3, 4, Pooling::Mean);
  auto max = mean;
  max.pooling = Pooling::Max;
  const Eigen::MatrixXd f = random_matrix(rng, 4, 1);
  const std::vector<std::size_t> pos{1};
  EXPECT_EQ(backward(mean, forward(mean, f), pos), backward(max, forward(max, f), pos));
}

TEST(Backward, StaleTraceRejected) {
  Rng rng(3);
  const auto p = random_params(rng, 4, 5, 3, 4);
  const auto q = random_params(rng, 4, 6, 3, 4);
  const auto trace = forward(q, random_matrix(rng, 4, 2));
  EXPECT_THROW(backward(p, trace, std::vector<std::size_t>{0}), ShapeError);
}

TEST(Backward, ReluGateIsStrict) {
  // One hidden unit sits exactly at zero pre-activation; its weights get no
  // gradient even though the upstream signal is nonzero.
  ModelParams p;
  p.head.W1 = Eigen::MatrixXd::Identity(2, 2);
  p.head.b1 = Eigen::VectorXd::Zero(2);
  p.head.W2 = Eigen::MatrixXd::Identity(2, 2);
  p.head.b2 = Eigen::VectorXd::Zero(2);
  p.semantic = SemanticMatrix({"a", "b"}, Eigen::MatrixXd::Identity(2, 2));
  Eigen::MatrixXd f(2, 1);
  f << 0.0, 1.0;
  const auto g = backward(p, forward(p, f), std::vector<std::size_t>{0});
  EXPECT_EQ(g.b1(0), 0.0);
  EXPECT_EQ(g.W1.row(0).norm(), 0.0);
  EXPECT_NE(g.b1(1), 0.0);
}

TEST(FiniteDiff, RejectsNonPositiveStep) {
  Rng rng(1);
  const auto p = random_params(rng, 2, 2, 2, 2);
  const Eigen::MatrixXd f = random_matrix(rng, 2, 1);
  EXPECT_THROW(finite_diff_grad(p, f, std::vector<std::size_t>{0}, 0.0), ConfigError);
  EXPECT_THROW(finite_diff_grad(p, f, std::vector<std::size_t>{0}, -1e-5), ConfigError);
}

TEST(GradientCheck, HundredTieFreeConfigurations) {
  const auto report = run_gradient_check(GradCheckOptions{});
  EXPECT_EQ(report.trials.size(), 100u);
  EXPECT_TRUE(report.passed);
  EXPECT_LT(report.max_rel_error, 1e-4);
  std::size_t max_trials = 0;
  for (const auto& t : report.trials) {
    max_trials += t.pooling == Pooling::Max;
    EXPECT_LE(t.D, 8u);
    EXPECT_LE(t.H, 8u);
    EXPECT_LE(t.d, 4u);
    EXPECT_LE(t.S, 5u);
    EXPECT_LE(t.instances, 4u);
  }
  EXPECT_EQ(max_trials, 50u);
}

TEST(GradientCheck, FrozenMatrixIsUntouched) {
  Rng rng(6);
  const auto p = random_params(rng, 4, 5, 3, 4, Pooling::Max);
  const auto before = p.semantic;
  const auto trace = forward(p, random_matrix(rng, 4, 3));
  backward(p, trace, std::vector<std::size_t>{0, 3});
  EXPECT_EQ(p.semantic, before);
}
