// Copyright 2026 The linsup Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "linsup/expfam.hpp"

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

namespace linsup {
namespace {

FeatureMap SurfaceF() {
  MatrixXd phi(1, 3);
  phi << 5, -1, 0;
  return FeatureMap(phi);
}

Params Theta(std::initializer_list<double> v) {
  VectorXd t(v.size());
  int i = 0;
  for (double x : v) t[i++] = x;
  return {t};
}

// Softmax by direct exponentiation, no max subtraction.
VectorXd NaiveSoftmax(const FeatureMap& fm, const VectorXd& theta) {
  VectorXd e(fm.outcomes());
  for (int y = 0; y < fm.outcomes(); ++y) e[y] = std::exp(fm.column(y).dot(theta));
  return e / e.sum();
}

FeatureMap RandomFeatures(Rng& rng, int d, int m) {
  std::normal_distribution<double> normal;
  MatrixXd phi(d, m);
  for (int i = 0; i < d; ++i)
    for (int y = 0; y < m; ++y) phi(i, y) = normal(rng);
  return FeatureMap(phi);
}

TEST(LogPartitionTest, UniformCaseIsLogM) {
  EXPECT_NEAR(LogPartition(SurfaceF(), Theta({0.0})), std::log(3.0), 1e-15);
}

TEST(LogPartitionTest, SingleOutcome) {
  MatrixXd phi(2, 1);
  phi << 1.5, -2.0;
  EXPECT_NEAR(LogPartition(FeatureMap(phi), Theta({0.3, 0.7})), 0.45 - 1.4, 1e-15);
}

TEST(LogPartitionTest, MatchesNaiveSum) {
  const double naive = std::log(std::exp(5.0) + std::exp(-1.0) + 1.0);
  EXPECT_NEAR(LogPartition(SurfaceF(), Theta({1.0})), naive, 1e-13);
}

TEST(LogPartitionTest, NoOverflowAtLargeTheta) {
  const double a = LogPartition(SurfaceF(), Theta({400.0}));
  EXPECT_TRUE(std::isfinite(a));
  EXPECT_NEAR(a, 2000.0, 1e-9);
}

TEST(DistributionTest, UniformAtZero) {
  const VectorXd p = Distribution(FourOutcomeFeatures(), Theta({0, 0}));
  for (int y = 0; y < 4; ++y) EXPECT_DOUBLE_EQ(p[y], 0.25);
}

TEST(DistributionTest, FourOutcomeModelMatchesSoftmax) {
  const FeatureMap fm = FourOutcomeFeatures();
  const VectorXd p = Distribution(fm, Theta({2.0, -0.1}));
  VectorXd scores(4);
  scores << 0.0, -0.1, 2.0, 1.9;
  const VectorXd expected = scores.array().exp() / scores.array().exp().sum();
  EXPECT_LT((p - expected).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((p - NaiveSoftmax(fm, Theta({2.0, -0.1}).theta)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(DistributionTest, ConcentratesOnLargeFirstCoordinate) {
  const VectorXd p = Distribution(FourOutcomeFeatures(), Theta({50.0, 0.0}));
  EXPECT_NEAR(p[2] + p[3], 1.0, 1e-14);
  EXPECT_LT(p[0], 1e-20);
  EXPECT_NEAR(p[2], 0.5, 1e-15);
}

TEST(DistributionTest, SumsToOneIncludingNormFifty) {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const FeatureMap fm = RandomFeatures(rng, 3, 6);
    std::normal_distribution<double> normal;
    VectorXd theta(3);
    for (int i = 0; i < 3; ++i) theta[i] = normal(rng);
    theta *= 50.0 / theta.norm();
    const VectorXd p = Distribution(fm, {theta});
    EXPECT_NEAR(p.sum(), 1.0, 1e-12);
    EXPECT_TRUE((p.array() >= 0.0).all());
  }
}

TEST(MeanStatsTest, ColumnAverageAtZero) {
  const MomentVector mu = MeanStats(FourOutcomeFeatures(), Theta({0, 0}));
  EXPECT_DOUBLE_EQ(mu.mu[0], 0.5);
  EXPECT_DOUBLE_EQ(mu.mu[1], 0.5);
  EXPECT_EQ(mu.n, 0);
}

TEST(MeanStatsTest, EnumerationOracle) {
  const FeatureMap fm = FourOutcomeFeatures();
  const VectorXd p = NaiveSoftmax(fm, Theta({2.0, -0.1}).theta);
  const VectorXd expected = fm.phi() * p;
  const MomentVector mu = MeanStats(fm, Theta({2.0, -0.1}));
  EXPECT_LT((mu.mu - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(FisherInfoTest, SingleOutcomeIsZero) {
  MatrixXd phi(2, 1);
  phi << 1.0, 3.0;
  EXPECT_EQ(FisherInfo(FeatureMap(phi), Theta({1, 1})).cwiseAbs().maxCoeff(), 0.0);
}

TEST(FisherInfoTest, FourOutcomeAtZero) {
  const MatrixXd fisher = FisherInfo(FourOutcomeFeatures(), Theta({0, 0}));
  // Enumerate E[phi phi^T] - mu mu^T directly.
  const FeatureMap fm = FourOutcomeFeatures();
  MatrixXd second = MatrixXd::Zero(2, 2);
  for (int y = 0; y < 4; ++y) second += 0.25 * fm.column(y) * fm.column(y).transpose();
  const VectorXd mu = VectorXd::Constant(2, 0.5);
  const MatrixXd expected = second - mu * mu.transpose();
  EXPECT_LT((fisher - expected).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_DOUBLE_EQ(fisher(0, 0), 0.25);
  EXPECT_DOUBLE_EQ(fisher(1, 1), 0.25);
  EXPECT_NEAR(fisher(0, 1), 0.0, 1e-16);
}

// Central finite differences on the log-partition and on the mean map.
TEST(ExpFamPropertyTest, DerivativesMatchFiniteDifferences) {
  Rng rng(11);
  std::normal_distribution<double> normal;
  const double h = 1e-5;
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 1 + trial % 4;
    const int m = 2 + trial % 5;
    const FeatureMap fm = RandomFeatures(rng, d, m);
    VectorXd theta(d);
    for (int i = 0; i < d; ++i) theta[i] = normal(rng);
    const VectorXd grad = MeanStats(fm, {theta}).mu;
    const MatrixXd fisher = FisherInfo(fm, {theta});
    for (int i = 0; i < d; ++i) {
      VectorXd up = theta, down = theta;
      up[i] += h;
      down[i] -= h;
      const double fd = (LogPartition(fm, {up}) - LogPartition(fm, {down})) / (2 * h);
      EXPECT_LE(std::abs(fd - grad[i]), 1e-6 * std::max(1.0, std::abs(grad[i])));
      const VectorXd col = (MeanStats(fm, {up}).mu - MeanStats(fm, {down}).mu) / (2 * h);
      EXPECT_LT((col - fisher.col(i)).cwiseAbs().maxCoeff(), 1e-5);
    }
  }
}

TEST(FitFromMomentsTest, RecoversTheta) {
  const FeatureMap fm = FourOutcomeFeatures();
  const Params truth = Theta({2.0, -0.1});
  const Params fit = FitFromMoments(fm, MeanStats(fm, truth));
  EXPECT_LT((fit.theta - truth.theta).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT((MeanStats(fm, fit).mu - MeanStats(fm, truth).mu).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(FitFromMomentsTest, ColumnAverageGivesZero) {
  const FeatureMap fm = FourOutcomeFeatures();
  const Params fit = FitFromMoments(fm, {VectorXd::Constant(2, 0.5), 0});
  EXPECT_LT(fit.theta.cwiseAbs().maxCoeff(), 1e-6);
}

TEST(FitFromMomentsTest, OutsidePolytope) {
  const FeatureMap fm = FourOutcomeFeatures();
  try {
    FitFromMoments(fm, {VectorXd::Constant(2, 2.0), 0});
    FAIL() << "expected NotInPolytope";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNotInPolytope);
  }
}

// phi rows 0 and 1 duplicate each other, so theta is only identified up to
// the direction (1, -1).
TEST(FitFromMomentsTest, RankDeficientGivesMinimumNorm) {
  MatrixXd phi(2, 3);
  phi << 0, 1, 2,
         0, 1, 2;
  const FeatureMap fm(phi);
  VectorXd truth(2);
  truth << 0.7, 0.1;
  const Params fit = FitFromMoments(fm, MeanStats(fm, {truth}));
  EXPECT_NEAR(fit.theta[0], 0.4, 1e-8);
  EXPECT_NEAR(fit.theta[1], 0.4, 1e-8);
}

TEST(FitFromMomentsTest, RankDeficientInconsistentMomentsReportNullDirection) {
  MatrixXd phi(2, 3);
  phi << 0, 1, 2,
         0, 1, 2;
  VectorXd mu(2);
  mu << 0.8, 1.2;
  try {
    FitFromMoments(FeatureMap(phi), {mu, 0});
    FAIL() << "expected NonIdentifiable";
  } catch (const NonIdentifiableError& e) {
    const VectorXd v = e.null_direction();
    EXPECT_NEAR(std::abs(v[0] + v[1]), 0.0, 1e-12);
    EXPECT_NEAR(v.norm(), 1.0, 1e-12);
  }
}

TEST(ExpFamPropertyTest, FitInvertsMeanStats) {
  Rng rng(5);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 1 + trial % 3;
    const int m = d + 2 + trial % 3;
    const FeatureMap fm = RandomFeatures(rng, d, m);
    VectorXd theta(d);
    for (int i = 0; i < d; ++i) theta[i] = normal(rng);
    const Params fit = FitFromMoments(fm, MeanStats(fm, {theta}));
    EXPECT_LT((fit.theta - theta).cwiseAbs().maxCoeff(), 1e-6) << "trial " << trial;
  }
}

TEST(SampleTest, ConcentratedModelReturnsArgmax) {
  MatrixXd phi(1, 3);
  phi << 0, 1, 2;
  const FeatureMap fm(phi);
  Rng rng(3);
  int hits = 0;
  for (int i = 0; i < 10000; ++i) hits += SampleOutcome(fm, Theta({50.0}), rng) == 2;
  EXPECT_GE(hits, 9990);
}

TEST(SampleTest, UniformFrequenciesWithinThreeSigma) {
  const FeatureMap fm = FourOutcomeFeatures();
  Rng rng(99);
  const int n = 100000;
  std::vector<int> counts(4, 0);
  for (int i = 0; i < n; ++i) ++counts[SampleOutcome(fm, Theta({0, 0}), rng)];
  const double sigma = std::sqrt(n * 0.25 * 0.75);
  for (int c : counts) EXPECT_LT(std::abs(c - n * 0.25), 3 * sigma);
}

TEST(SampleTest, DeterministicGivenSeed) {
  const FeatureMap fm = FourOutcomeFeatures();
  Rng a = MakeStream(42, {1, 2});
  Rng b = MakeStream(42, {1, 2});
  for (int i = 0; i < 100; ++i)
    EXPECT_EQ(SampleOutcome(fm, Theta({0.3, 0.2}), a), SampleOutcome(fm, Theta({0.3, 0.2}), b));
}

TEST(FactorizedFitTest, SinglePositionReducesToFiniteFamily) {
  MatrixXd f(2, 4);
  f << 0, 0, 1, 1,
       0, 1, 0, 1;
  const FactorizedModel model(1, 4, f);
  VectorXd truth(2);
  truth << 1.2, -0.4;
  const MomentVector mu = MeanStats(FeatureMap(f), {truth});
  FactorizedFitOptions opts;
  opts.newton.grad_tol = 1e-10;
  const Params a = FactorizedFit(model, mu, VectorXd::Ones(1), opts);
  const Params b = FitFromMoments(FeatureMap(f), mu);
  EXPECT_LT((a.theta - b.theta).cwiseAbs().maxCoeff(), 1e-7);
}

// One-hot word x label features: the population moments of a known
// conditional w* are reproduced by the fitted conditionals.
TEST(FactorizedFitTest, SaturatedFeaturesReproduceConditionals) {
  const int v = 4, k = 3;
  MatrixXd w(v, k);
  w << 0.7, 0.2, 0.1,
       0.05, 0.9, 0.05,
       0.3, 0.3, 0.4,
       0.01, 0.01, 0.98;
  const MatrixXd f = MatrixXd::Identity(v * k, v * k);
  const FactorizedModel model(v, k, f);
  VectorXd counts(v);
  counts << 2.5, 1.0, 0.5, 0.25;
  VectorXd mu(v * k);
  for (int a = 0; a < v; ++a)
    for (int b = 0; b < k; ++b) mu[a * k + b] = counts[a] * w(a, b);
  const Params fit = FactorizedFit(model, {mu, 0}, counts);
  for (int a = 0; a < v; ++a) {
    const VectorXd p = model.Conditional(a, fit.theta);
    for (int b = 0; b < k; ++b) EXPECT_NEAR(p[b], w(a, b), 1e-4);
  }
}

// Oracle: multinomial logistic regression by plain gradient ascent on the
// per-token log-likelihood, written independently of the moment objective.
TEST(FactorizedFitTest, SupervisedMatchesPerTokenLogistic) {
  const int v = 3, k = 2;
  // word features plus one shared "bias per label" feature
  MatrixXd f = MatrixXd::Zero(v * k + k, v * k);
  for (int a = 0; a < v; ++a)
    for (int b = 0; b < k; ++b) {
      f(a * k + b, a * k + b) = 1.0;
      f(v * k + b, a * k + b) = 1.0;
    }
  const FactorizedModel model(v, k, f);
  const std::vector<std::pair<int, int>> tokens = {
      {0, 0}, {0, 0}, {0, 1}, {1, 1}, {1, 1}, {1, 0}, {1, 1}, {2, 0}, {2, 1}, {2, 1}};
  const double l2 = 0.05;
  const double examples = 2.0;  // tokens come from two sequences
  VectorXd mu = VectorXd::Zero(f.rows());
  VectorXd counts = VectorXd::Zero(v);
  for (auto [a, b] : tokens) {
    mu += f.col(a * k + b) / examples;
    counts[a] += 1.0 / examples;
  }
  FactorizedFitOptions opts;
  opts.l2 = l2;
  opts.newton.grad_tol = 1e-10;
  const Params fit = FactorizedFit(model, {mu, 2}, counts, opts);

  VectorXd theta = VectorXd::Zero(f.rows());
  for (int it = 0; it < 200000; ++it) {
    VectorXd grad = -l2 * theta * examples;
    for (auto [a, b] : tokens) {
      VectorXd s(k);
      for (int c = 0; c < k; ++c) s[c] = f.col(a * k + c).dot(theta);
      VectorXd p = (s.array() - s.maxCoeff()).exp();
      p /= p.sum();
      grad += f.col(a * k + b);
      for (int c = 0; c < k; ++c) grad -= p[c] * f.col(a * k + c);
    }
    theta += 0.05 * grad;
    if (grad.norm() < 1e-12) break;
  }
  EXPECT_LT((fit.theta - theta).cwiseAbs().maxCoeff(), 1e-6);
  for (int a = 0; a < v; ++a) EXPECT_EQ(model.Predict(a, fit.theta), model.Predict(a, theta));
}

}  // namespace
}  // namespace linsup
