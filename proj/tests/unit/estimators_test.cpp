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

#include "linsup/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "linsup/asymptotics.hpp"

namespace linsup {
namespace {

MatrixXd InvLlChannel() {
  MatrixXd s(3, 3);
  s << 1.0 / 3, 1.0 / 6, 1.0 / 4,
       1.0 / 3, 1.0 / 6, 1.0 / 2,
       1.0 / 3, 2.0 / 3, 1.0 / 4;
  return s;
}

FeatureMap InvLlFeatures() {
  MatrixXd phi(1, 3);
  phi << 2, 1, 0;
  return FeatureMap(phi);
}

FeatureMap SurfaceFeatures() {
  MatrixXd phi(1, 3);
  phi << 5, -1, 0;
  return FeatureMap(phi);
}

Params T1(double a) { return {VectorXd::Constant(1, a)}; }

Params T2(double a, double b) {
  VectorXd t(2);
  t << a, b;
  return {t};
}

double MaxAbs(const MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

double Median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

EmpiricalObsDist Population(const VectorXd& q) { return {q, 0}; }

// Draws n observations y -> o through the channel and returns counts.
VectorXd SimulateCounts(const FeatureMap& fm, const Params& theta, const MatrixXd& s,
                        long n, Rng& rng) {
  const VectorXd p = Distribution(fm, theta);
  VectorXd counts = VectorXd::Zero(s.rows());
  for (long i = 0; i < n; ++i) {
    const int y = SampleIndex(std::span<const double>(p.data(), p.size()), rng);
    const VectorXd col = s.col(y);
    counts[SampleIndex(std::span<const double>(col.data(), col.size()), rng)] += 1.0;
  }
  return counts;
}

MatrixXd RandomDeterministic(Rng& rng, int k, int m) {
  std::vector<int> assign(m);
  for (int y = 0; y < m; ++y) assign[y] = y < k ? y : UniformInt(rng, 0, k - 1);
  std::shuffle(assign.begin(), assign.end(), rng);
  MatrixXd s = MatrixXd::Zero(k, m);
  for (int y = 0; y < m; ++y) s(assign[y], y) = 1.0;
  return s;
}

TEST(ChannelMatrixTest, Validation) {
  EXPECT_THROW(ChannelMatrix(MatrixXd::Constant(2, 2, 0.4)), Error);
  EXPECT_TRUE(ChannelMatrix(MatrixXd::Identity(3, 3)).IsDeterministic());
  EXPECT_FALSE(ChannelMatrix(InvLlChannel()).IsDeterministic());
}

TEST(MomentEstimateTest, SingleObservationIsDirectFit) {
  const FeatureMap fm = FourOutcomeFeatures();
  MatrixXd beta(2, 1);
  beta << 0.3, 0.6;
  const MomentEstimateResult r = MomentEstimate(beta, fm);
  const Params direct = FitFromMoments(fm, {beta.col(0), 1});
  EXPECT_EQ(r.theta.theta, direct.theta);
  EXPECT_EQ(r.mu.n, 1);
}

TEST(MomentEstimateTest, NoiselessRateHalves) {
  const FeatureMap fm = FourOutcomeFeatures();
  const Params truth = T2(1.0, -0.5);
  const VectorXd p = Distribution(fm, truth);
  std::vector<double> err_small, err_large;
  for (int trial = 0; trial < 50; ++trial) {
    for (long n : {4000L, 16000L}) {
      Rng rng = MakeStream(31, {static_cast<std::uint64_t>(trial), static_cast<std::uint64_t>(n)});
      MatrixXd betas(2, n);
      for (long i = 0; i < n; ++i)
        betas.col(i) = fm.column(SampleIndex(std::span<const double>(p.data(), 4), rng));
      const double e = (MomentEstimate(betas, fm).theta.theta - truth.theta).norm();
      (n == 4000 ? err_small : err_large).push_back(e);
    }
  }
  const double ratio = Median(err_large) / Median(err_small);
  EXPECT_GT(ratio, 0.35);
  EXPECT_LT(ratio, 0.7);
}

TEST(MomentEstimateTest, RandomizedResponseWithinThreeSigma) {
  const FeatureMap fm = FourOutcomeFeatures();
  const Params truth = T2(2.0, -0.1);
  const ClassicRR ch = ClassicRR::Uniform(0.5, 4);
  const ChannelTable t = Tabulate(ch, fm);
  Rng rng(32);
  const long n = 100000;
  const VectorXd counts = SimulateCounts(fm, truth, t.S, n, rng);
  const MomentEstimateResult r = MomentEstimate(t, EmpiricalObsDist::FromCounts(counts), fm);
  const MatrixXd sigma = SigmaMom(fm, truth, t);
  for (int i = 0; i < 2; ++i)
    EXPECT_LT(std::abs(r.theta.theta[i] - truth.theta[i]), 3 * std::sqrt(sigma(i, i) / n));
}

TEST(MomentEstimateTest, EmptyRefused) {
  EXPECT_THROW(MomentEstimate(MatrixXd(2, 0), FourOutcomeFeatures()), Error);
}

TEST(EmTest, IdentityChannelIsSupervisedMle) {
  const FeatureMap fm = FourOutcomeFeatures();
  VectorXd q(4);
  q << 0.1, 0.2, 0.3, 0.4;
  const ChannelMatrix s(MatrixXd::Identity(4, 4));
  const Params mle = FitFromMoments(fm, {fm.phi() * q, 0});
  const Params step = OneEmStep(T2(3.0, -2.0), Population(q), s, fm);
  EXPECT_LT(MaxAbs(step.theta - mle.theta), 1e-8);
  const EmResult em = EmMarginalMl(Population(q), s, fm, T2(3.0, -2.0));
  EXPECT_LT(MaxAbs(em.theta.theta - mle.theta), 1e-8);
  EXPECT_LE(em.iterations, 2);
}

TEST(EmTest, MonotoneFromRandomInits) {
  const FeatureMap fm = FourOutcomeFeatures();
  const ChannelTable t = Tabulate(ClassicRR::Uniform(0.5, 4), fm);
  const ChannelMatrix s(t.S);
  Rng rng(33);
  const VectorXd counts = SimulateCounts(fm, T2(2.0, -0.1), t.S, 2000, rng);
  const EmpiricalObsDist q = EmpiricalObsDist::FromCounts(counts);
  std::normal_distribution<double> normal(0.0, 2.0);
  for (int start = 0; start < 20; ++start) {
    const EmResult r = EmMarginalMl(q, s, fm, T2(normal(rng), normal(rng)));
    for (std::size_t i = 1; i < r.ll_trace.size(); ++i)
      EXPECT_GE(r.ll_trace[i], r.ll_trace[i - 1] - 1e-12);
    EXPECT_TRUE(r.converged);
  }
}

TEST(EmTest, WithinThreeSigmaOfSigmaMarg) {
  const FeatureMap fm = FourOutcomeFeatures();
  const Params truth = T2(2.0, -0.1);
  const ChannelTable t = Tabulate(ClassicRR::Uniform(0.5, 4), fm);
  Rng rng(34);
  const long n = 100000;
  const VectorXd counts = SimulateCounts(fm, truth, t.S, n, rng);
  const EmResult r = EmMarginalMl(EmpiricalObsDist::FromCounts(counts), ChannelMatrix(t.S), fm,
                                  T2(0, 0));
  const MatrixXd sigma = SigmaMarg(fm, truth, t.S);
  for (int i = 0; i < 2; ++i)
    EXPECT_LT(std::abs(r.theta.theta[i] - truth.theta[i]), 3 * std::sqrt(sigma(i, i) / n));
}

TEST(EmTest, MultiStartPicksBest) {
  const FeatureMap fm = InvLlFeatures();
  const ChannelMatrix s(InvLlChannel());
  const VectorXd q = s.matrix() * Distribution(fm, T1(1.5));
  const EmResult best = EmMultiStart(Population(q), s, fm, 6, 5);
  const EmResult again = EmMultiStart(Population(q), s, fm, 6, 5, 2.0, {}, 3);
  EXPECT_EQ(best.theta.theta, again.theta.theta);
  EXPECT_NEAR(best.theta.theta[0], 1.5, 1e-3);
}

TEST(MarginalLlTest, InvLlCurveIsNotConcave) {
  const FeatureMap fm = InvLlFeatures();
  const ChannelMatrix s(InvLlChannel());
  const EmpiricalObsDist q = Population(s.matrix() * Distribution(fm, T1(1.0)));
  std::vector<double> ll;
  for (int i = 0; i <= 400; ++i) ll.push_back(MarginalLl(T1(-10.0 + 0.05 * i), q, s, fm));
  bool neg = false, pos = false;
  for (std::size_t i = 1; i + 1 < ll.size(); ++i) {
    const double second = ll[i + 1] - 2 * ll[i] + ll[i - 1];
    neg |= second < -1e-12;
    pos |= second > 1e-12;
  }
  EXPECT_TRUE(neg && pos);
}

TEST(MarginalLlTest, IdenticalColumnsFlatAtUniform) {
  const FeatureMap fm = FourOutcomeFeatures();
  const ChannelMatrix s(MatrixXd::Constant(3, 4, 1.0 / 3));
  VectorXd q(3);
  q << 0.5, 0.2, 0.3;
  const double h = 1e-5;
  for (int i = 0; i < 2; ++i) {
    VectorXd up = VectorXd::Zero(2), down = VectorXd::Zero(2);
    up[i] = h;
    down[i] = -h;
    const double g = (MarginalLl({up}, Population(q), s, fm) -
                      MarginalLl({down}, Population(q), s, fm)) / (2 * h);
    EXPECT_NEAR(g, 0.0, 1e-10);
  }
}

TEST(MarginalLlTest, TruthBeatsPerturbation) {
  const FeatureMap fm = FourOutcomeFeatures();
  const Params truth = T2(1.0, 0.5);
  const ChannelTable t = Tabulate(ClassicRR::Uniform(0.6, 4), fm);
  const ChannelMatrix s(t.S);
  Rng rng(35);
  const EmpiricalObsDist q =
      EmpiricalObsDist::FromCounts(SimulateCounts(fm, truth, t.S, 200000, rng));
  EXPECT_GT(MarginalLl(truth, q, s, fm), MarginalLl(T2(1.3, 0.2), q, s, fm));
  EXPECT_GT(MarginalLl(truth, q, s, fm), MarginalLl(T2(0.7, 0.8), q, s, fm));
}

TEST(PinvRecoverTest, DeterministicClosedForm) {
  Rng rng(36);
  for (int trial = 0; trial < 20; ++trial) {
    const int m = 2 + trial % 7;
    const int k = 1 + UniformInt(rng, 0, m - 1);
    const MatrixXd s = RandomDeterministic(rng, k, m);
    const VectorXd rowsum = s.rowwise().sum();
    const MatrixXd closed = s.transpose() * rowsum.cwiseInverse().asDiagonal();
    EXPECT_LT(MaxAbs(closed - Pinv(s)), 1e-10);
    EXPECT_LT(MaxAbs(closed - s.transpose() * (s * s.transpose()).inverse()), 1e-10);
  }
}

TEST(PinvRecoverTest, FullColumnRankIsExact) {
  Rng rng(37);
  for (int trial = 0; trial < 20; ++trial) {
    const int m = 2 + trial % 4;
    const int k = m + trial % 3;
    MatrixXd s(k, m);
    for (int o = 0; o < k; ++o)
      for (int y = 0; y < m; ++y) s(o, y) = 0.05 + Uniform01(rng);
    for (int y = 0; y < m; ++y) s.col(y) /= s.col(y).sum();
    VectorXd p(m);
    for (int y = 0; y < m; ++y) p[y] = 2 * Uniform01(rng) - 1;
    EXPECT_LT(MaxAbs(PinvRecover(Population(s * p), ChannelMatrix(s)) - p), 1e-10);
  }
}

TEST(PinvRecoverTest, InvLlMatrix) {
  const MatrixXd s = InvLlChannel();
  EXPECT_EQ(NumericalRank(s), 3);
  VectorXd p(3);
  p << 0.2, 0.3, 0.5;
  EXPECT_LT(MaxAbs(PinvRecover(Population(s * p), ChannelMatrix(s)) - p), 1e-12);
  EXPECT_EQ(NegativeMass(p), 0.0);
}

TEST(KlRecoverTest, RecoversWhenWellSpecified) {
  const MatrixXd s = InvLlChannel();
  VectorXd p(3);
  p << 0.2, 0.3, 0.5;
  const KlRecoverResult r = KlRecover(Population(s * p), ChannelMatrix(s));
  EXPECT_LT(MaxAbs(r.p - p), 1e-6);
  for (std::size_t i = 1; i < r.objective_trace.size(); ++i)
    EXPECT_LE(r.objective_trace[i], r.objective_trace[i - 1] + 1e-15);
}

TEST(KlRecoverTest, IdenticalColumnsSplitEvenly) {
  MatrixXd s(2, 3);
  s << 0.8, 0.8, 0.1,
       0.2, 0.2, 0.9;
  VectorXd q(2);
  q << 0.5, 0.5;
  const KlRecoverResult r = KlRecover(Population(q), ChannelMatrix(s));
  EXPECT_NEAR(r.p[0], r.p[1], 1e-12);
  EXPECT_NEAR(r.p.sum(), 1.0, 1e-12);
}

TEST(KlRecoverTest, MisspecifiedMatchesGrid) {
  MatrixXd s(3, 3);
  s << 0.6, 0.3, 0.2,
       0.3, 0.4, 0.3,
       0.1, 0.3, 0.5;
  VectorXd q(3);
  q << 0.05, 0.05, 0.9;  // outside S times the simplex
  const KlRecoverResult r = KlRecover(Population(q), ChannelMatrix(s));
  EXPECT_GT(r.objective_trace.back(), 1e-3);
  double best = std::numeric_limits<double>::infinity();
  const int grid = 2000;
  for (int a = 0; a <= grid; ++a)
    for (int b = 0; a + b <= grid; ++b) {
      VectorXd p(3);
      p << double(a) / grid, double(b) / grid, double(grid - a - b) / grid;
      best = std::min(best, KlObjective(q, s, p));
    }
  EXPECT_NEAR(r.objective_trace.back(), best, 1e-6);
  EXPECT_LE(r.objective_trace.back(), best + 1e-12);
}

TEST(KlProjectTest, MemberOfFamilyIsFixed) {
  const FeatureMap fm = FourOutcomeFeatures();
  const Params theta = T2(0.8, -1.2);
  EXPECT_LT(MaxAbs(KlProject(Distribution(fm, theta), fm).theta - theta.theta), 1e-7);
  EXPECT_LT(MaxAbs(KlProject(VectorXd::Constant(4, 0.25), fm).theta), 1e-8);
}

TEST(KlProjectTest, MatchesGridMinimization) {
  const FeatureMap fm = SurfaceFeatures();
  Rng rng(38);
  for (int trial = 0; trial < 10; ++trial) {
    VectorXd r(3);
    for (int y = 0; y < 3; ++y) r[y] = 0.05 + Uniform01(rng);
    r /= r.sum();
    const Params fit = KlProject(r, fm);
    auto kl = [&](double t) {
      const VectorXd p = Distribution(fm, T1(t));
      return (r.array() * (r.array() / p.array()).log()).sum();
    };
    double lo = -5, hi = 5;
    for (int it = 0; it < 200; ++it) {
      const double a = lo + (hi - lo) / 3, b = hi - (hi - lo) / 3;
      (kl(a) < kl(b) ? hi : lo) = (kl(a) < kl(b) ? b : a);
    }
    const VectorXd pg = Distribution(fm, T1(0.5 * (lo + hi)));
    EXPECT_LT(MaxAbs(Distribution(fm, fit) - pg), 1e-6);
  }
}

TEST(OneEmStepTest, DeterministicEquivalence) {
  Rng rng(39);
  for (int trial = 0; trial < 20; ++trial) {
    const int m = 3 + trial % 6;
    const int k = 2 + UniformInt(rng, 0, m - 2);
    const int d = 1 + UniformInt(rng, 0, k - 2 > 0 ? std::min(k - 2, 2) : 0);
    const MatrixXd s = RandomDeterministic(rng, k, m);
    MatrixXd phi(d, m);
    for (int i = 0; i < d; ++i)
      for (int y = 0; y < m; ++y) phi(i, y) = 2 * Uniform01(rng) - 1;
    const FeatureMap fm(phi);
    VectorXd q(k);
    for (int o = 0; o < k; ++o) q[o] = 0.1 + Uniform01(rng);
    q /= q.sum();
    const ChannelMatrix ch(s);
    const Params em = OneEmStep({VectorXd::Zero(d)}, Population(q), ch, fm);
    const Params mom = KlProject(PinvRecover(Population(q), ch), fm);
    EXPECT_LT(MaxAbs(em.theta - mom.theta), 1e-8) << "trial " << trial;
  }
}

TEST(OneEmStepTest, NonDeterministicDiffers) {
  const FeatureMap fm = InvLlFeatures();
  const ChannelMatrix s(InvLlChannel());
  const EmpiricalObsDist q = Population(s.matrix() * Distribution(fm, T1(1.0)));
  const Params em = OneEmStep(T1(0.0), q, s, fm);
  const Params mom = KlProject(PinvRecover(q, s), fm);
  EXPECT_GT(std::abs(em.theta[0] - mom.theta[0]), 1e-3);
}

TEST(MisspecifiedTest, EstimatorsDisagreeAtPopulation) {
  const FeatureMap fm = InvLlFeatures();
  const ChannelMatrix s(InvLlChannel());
  VectorXd q(3);
  q << 0.3, 0.45, 0.25;
  const VectorXd r = PinvRecover(Population(q), s);
  ASSERT_GT(NegativeMass(r), 0.0);
  const Params mom = KlProject(r, fm);
  const EmResult marg = EmMarginalMl(Population(q), s, fm, T1(0.0));
  EXPECT_GT(std::abs(marg.theta.theta[0] - mom.theta[0]), 0.05);
}

TEST(MomentRequirementTest, Classification) {
  const FeatureMap fm = FourOutcomeFeatures();
  EXPECT_EQ(MomentRequirementCheck(fm, ChannelMatrix(MatrixXd::Identity(4, 4))).kind,
            MomentRequirement::kFullRank);
  EXPECT_EQ(MomentRequirementCheck(fm, ChannelMatrix(MatrixXd::Constant(2, 4, 0.5))).kind,
            MomentRequirement::kInsufficient);
  // o reveals both coordinates of phi but merges nothing else: Phi = R S.
  const ChannelTable cr = Tabulate(CoordinateRelease::Uniform(1.0, 2), fm);
  const MomentRequirementReport rep = MomentRequirementCheck(fm, ChannelMatrix(cr.S));
  EXPECT_NE(rep.kind, MomentRequirement::kInsufficient);
  // Collapses outcomes 1 and 2, which differ in phi.
  MatrixXd merge(3, 4);
  merge << 1, 0, 0, 0,
           0, 1, 1, 0,
           0, 0, 0, 1;
  EXPECT_EQ(MomentRequirementCheck(fm, ChannelMatrix(merge)).kind,
            MomentRequirement::kInsufficient);
  MatrixXd phi(1, 4);
  phi << 0, 1, 1, 2;
  const MomentRequirementReport sum = MomentRequirementCheck(FeatureMap(phi), merge);
  EXPECT_EQ(sum.kind, MomentRequirement::kFactors);
  EXPECT_EQ(sum.rank, 3);
}

TEST(MomentRequirementTest, InvLlStableUnderScaling) {
  const FeatureMap fm = InvLlFeatures();
  const MomentRequirementReport base = MomentRequirementCheck(fm, InvLlChannel());
  EXPECT_EQ(base.kind, MomentRequirement::kFullRank);
  for (double c : {1e-3, 0.5, 7.0, 1e4})
    EXPECT_EQ(MomentRequirementCheck(fm, MatrixXd(c * InvLlChannel())).kind, base.kind);
}

}  // namespace
}  // namespace linsup
