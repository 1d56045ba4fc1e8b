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

#ifndef LINSUP_ESTIMATORS_HPP_
#define LINSUP_ESTIMATORS_HPP_

// The two estimators: moment matching on debiased statistics, and maximum
// marginal likelihood by EM; plus the distribution-space view of both
// (pseudo-inverse / KL recovery followed by projection onto the family).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "linsup/channels.hpp"
#include "linsup/error.hpp"
#include "linsup/expfam.hpp"
#include "linsup/linalg.hpp"
#include "linsup/parallel.hpp"
#include "linsup/rng.hpp"

namespace linsup {

// k x m matrix, column y the distribution of o given y.
class ChannelMatrix {
 public:
  explicit ChannelMatrix(MatrixXd s) : s_(std::move(s)) {
    Require(s_.rows() >= 1 && s_.cols() >= 1, "ChannelMatrix must be nonempty");
    Require((s_.array() >= 0.0).all(), "ChannelMatrix entries must be nonnegative");
    for (int y = 0; y < s_.cols(); ++y) {
      Require(std::abs(s_.col(y).sum() - 1.0) <= 1e-12,
              "ChannelMatrix column " + std::to_string(y) + " does not sum to 1");
    }
  }

  const MatrixXd& matrix() const { return s_; }
  int observations() const { return static_cast<int>(s_.rows()); }
  int outcomes() const { return static_cast<int>(s_.cols()); }

  // Every column is an indicator vector.
  bool IsDeterministic() const {
    return ((s_.array() == 0.0) || (s_.array() == 1.0)).all();
  }

 private:
  MatrixXd s_;
};

struct EmpiricalObsDist {
  VectorXd q_hat;
  long n = 0;

  static EmpiricalObsDist FromCounts(const VectorXd& counts) {
    const double total = counts.sum();
    Require(total > 0.0, "EmpiricalObsDist: no observations");
    Require((counts.array() >= 0.0).all(), "EmpiricalObsDist: negative count");
    return {counts / total, static_cast<long>(std::llround(total))};
  }

  static EmpiricalObsDist FromObservations(std::span<const int> obs, int k) {
    Require(!obs.empty(), "EmpiricalObsDist: no observations");
    VectorXd counts = VectorXd::Zero(k);
    for (int o : obs) {
      Require(o >= 0 && o < k, "EmpiricalObsDist: observation out of range");
      counts[o] += 1.0;
    }
    return FromCounts(counts);
  }
};

struct MomentEstimateResult {
  MomentVector mu;
  Params theta;
};

// Step one averages beta over the observations (columns of `betas`); step
// two matches the moments.
inline MomentEstimateResult MomentEstimate(const MatrixXd& betas, const FeatureMap& fm,
                                           const FitOptions& opts = {}) {
  if (betas.cols() == 0) throw Error(ErrorCode::kNoData, "MomentEstimate: no observations");
  Require(betas.rows() == fm.dim(), "MomentEstimate: beta dimension mismatch");
  MomentVector mu{betas.rowwise().mean(), static_cast<long>(betas.cols())};
  Params theta = FitFromMoments(fm, mu, opts);
  return {std::move(mu), std::move(theta)};
}

// Same estimator from a tabulated channel and the empirical distribution of
// its outputs.
inline MomentEstimateResult MomentEstimate(const ChannelTable& table,
                                           const EmpiricalObsDist& q,
                                           const FeatureMap& fm,
                                           const FitOptions& opts = {}) {
  Require(q.q_hat.size() == table.outputs(), "MomentEstimate: observation count mismatch");
  MomentVector mu{table.beta * q.q_hat, q.n};
  Params theta = FitFromMoments(fm, mu, opts);
  return {std::move(mu), std::move(theta)};
}

// Average log-likelihood sum_o q_hat(o) log sum_y S(o|y) p_theta(y).
inline double MarginalLl(const Params& theta, const EmpiricalObsDist& q,
                         const ChannelMatrix& s, const FeatureMap& fm) {
  Require(s.outcomes() == fm.outcomes(), "MarginalLl: channel/feature mismatch");
  Require(q.q_hat.size() == s.observations(), "MarginalLl: observation count mismatch");
  const VectorXd p = Distribution(fm, theta);
  const VectorXd marginal = s.matrix() * p;
  double ll = 0.0;
  for (int o = 0; o < q.q_hat.size(); ++o) {
    if (q.q_hat[o] == 0.0) continue;
    if (marginal[o] <= 0.0) return -std::numeric_limits<double>::infinity();
    ll += q.q_hat[o] * std::log(marginal[o]);
  }
  return ll;
}

// r(y) = sum_o q_hat(o) p(y | o) under p_theta; Phi r is the E-step's
// expected sufficient statistic.
inline VectorXd PosteriorAverage(const Params& theta, const EmpiricalObsDist& q,
                                 const ChannelMatrix& s, const FeatureMap& fm) {
  const VectorXd p = Distribution(fm, theta);
  const VectorXd marginal = s.matrix() * p;
  VectorXd weight = VectorXd::Zero(s.observations());
  for (int o = 0; o < weight.size(); ++o) {
    if (q.q_hat[o] == 0.0) continue;
    if (marginal[o] <= 0.0) {
      throw Error(ErrorCode::kInvalidArgument,
                  "observation " + std::to_string(o) + " has zero probability under the model");
    }
    weight[o] = q.q_hat[o] / marginal[o];
  }
  return (p.array() * (s.matrix().transpose() * weight).array()).matrix();
}

struct EmOptions {
  int max_iterations = 1000;
  double tol = 1e-10;  // stop once the LL gain drops below this
  FitOptions fit;
};

struct EmResult {
  Params theta;
  std::vector<double> ll_trace;  // LL at the initial point and after each step
  int iterations = 0;
  bool converged = false;
};

// Maximum marginal likelihood by EM. The E-step is exact enumeration; the
// M-step matches moments to the expected statistics. The LL sequence is
// checked for monotonicity on every step.
inline EmResult EmMarginalMl(const EmpiricalObsDist& q, const ChannelMatrix& s,
                             const FeatureMap& fm, const Params& init,
                             const EmOptions& opts = {}) {
  EmResult res;
  res.theta = init;
  double ll = MarginalLl(res.theta, q, s, fm);
  Require(std::isfinite(ll), "EmMarginalMl: initial point gives zero likelihood");
  res.ll_trace.push_back(ll);
  for (int it = 0; it < opts.max_iterations; ++it) {
    const VectorXd r = PosteriorAverage(res.theta, q, s, fm);
    FitOptions fit = opts.fit;
    fit.init = res.theta.theta;
    Params next = FitFromMoments(fm, {fm.phi() * r, q.n}, fit);
    const double next_ll = MarginalLl(next, q, s, fm);
    if (next_ll < ll - 1e-9 * (1.0 + std::abs(ll))) {
      throw std::logic_error("EM marginal log-likelihood decreased from " +
                             std::to_string(ll) + " to " + std::to_string(next_ll));
    }
    res.theta = std::move(next);
    res.ll_trace.push_back(next_ll);
    res.iterations = it + 1;
    const double gain = next_ll - ll;
    ll = next_ll;
    if (gain < opts.tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

inline EmResult EmMarginalMl(std::span<const int> observations, const ChannelMatrix& s,
                             const FeatureMap& fm, const Params& init,
                             const EmOptions& opts = {}) {
  return EmMarginalMl(EmpiricalObsDist::FromObservations(observations, s.observations()),
                      s, fm, init, opts);
}

// Runs EM from theta = 0 and from `starts - 1` random Gaussian inits; keeps
// the best final LL, ties going to the lowest start index.
inline EmResult EmMultiStart(const EmpiricalObsDist& q, const ChannelMatrix& s,
                             const FeatureMap& fm, int starts, std::uint64_t seed,
                             double init_scale = 2.0, const EmOptions& opts = {},
                             int threads = 1) {
  Require(starts >= 1, "EmMultiStart: need at least one start");
  std::vector<EmResult> runs(starts);
  ParallelFor(starts, threads, [&](long i) {
    Params init{VectorXd::Zero(fm.dim())};
    if (i > 0) {
      Rng rng = MakeStream(seed, {static_cast<std::uint64_t>(i)});
      std::normal_distribution<double> normal(0.0, init_scale);
      for (int k = 0; k < fm.dim(); ++k) init.theta[k] = normal(rng);
    }
    runs[i] = EmMarginalMl(q, s, fm, init, opts);
  });
  int best = 0;
  for (int i = 1; i < starts; ++i)
    if (runs[i].ll_trace.back() > runs[best].ll_trace.back()) best = i;
  return runs[best];
}

// r_hat = S^+ q_hat, the minimum-norm least-squares solution of S r = q_hat.
// Not projected onto the simplex.
inline VectorXd PinvRecover(const EmpiricalObsDist& q, const ChannelMatrix& s) {
  return Pinv(s.matrix(), 1e-10) * q.q_hat;
}

// Total mass of the negative entries of a recovered distribution.
inline double NegativeMass(const VectorXd& r) {
  return -r.cwiseMin(0.0).sum();
}

struct KlRecoverOptions {
  int max_iterations = 200000;
  double tol = 1e-13;  // stop once no entry of p moves by more than this
};

inline double KlObjective(const VectorXd& q_hat, const MatrixXd& s, const VectorXd& p) {
  const VectorXd sp = s * p;
  double kl = 0.0;
  for (int o = 0; o < q_hat.size(); ++o) {
    if (q_hat[o] == 0.0) continue;
    if (sp[o] <= 0.0) return std::numeric_limits<double>::infinity();
    kl += q_hat[o] * std::log(q_hat[o] / sp[o]);
  }
  return kl;
}

struct KlRecoverResult {
  VectorXd p;
  std::vector<double> objective_trace;
};

// argmin_{p in simplex} KL(q_hat || S p) by multiplicative EM updates from
// the uniform distribution. Outcomes with identical columns keep the split
// they start with, so ties resolve to an even split.
inline KlRecoverResult KlRecover(const EmpiricalObsDist& q, const ChannelMatrix& s,
                                 const KlRecoverOptions& opts = {}) {
  const MatrixXd& sm = s.matrix();
  const int m = s.outcomes();
  KlRecoverResult res{VectorXd::Constant(m, 1.0 / m), {}};
  res.objective_trace.push_back(KlObjective(q.q_hat, sm, res.p));
  for (int it = 0; it < opts.max_iterations; ++it) {
    const VectorXd sp = sm * res.p;
    VectorXd ratio = VectorXd::Zero(q.q_hat.size());
    for (int o = 0; o < ratio.size(); ++o)
      if (q.q_hat[o] > 0.0) ratio[o] = q.q_hat[o] / sp[o];
    VectorXd next_p = (res.p.array() * (sm.transpose() * ratio).array()).matrix();
    next_p /= next_p.sum();
    const double change = (next_p - res.p).cwiseAbs().maxCoeff();
    res.p = std::move(next_p);
    res.objective_trace.push_back(KlObjective(q.q_hat, sm, res.p));
    if (change < opts.tol) break;
  }
  return res;
}

// KL projection of r_hat onto the family, which is moment matching to
// Phi r_hat.
inline Params KlProject(const VectorXd& r_hat, const FeatureMap& fm,
                        const FitOptions& opts = {}) {
  Require(r_hat.size() == fm.outcomes(), "KlProject: size mismatch");
  return FitFromMoments(fm, {fm.phi() * r_hat, 0}, opts);
}

// One EM iteration from theta0: posterior average under theta0, then the
// M-step.
inline Params OneEmStep(const Params& theta0, const EmpiricalObsDist& q,
                        const ChannelMatrix& s, const FeatureMap& fm,
                        const FitOptions& opts = {}) {
  const VectorXd r = PosteriorAverage(theta0, q, s, fm);
  return FitFromMoments(fm, {fm.phi() * r, q.n}, opts);
}

enum class MomentRequirement { kFullRank, kFactors, kInsufficient };

inline const char* MomentRequirementName(MomentRequirement r) {
  switch (r) {
    case MomentRequirement::kFullRank: return "full_rank";
    case MomentRequirement::kFactors: return "factors";
    case MomentRequirement::kInsufficient: return "insufficient";
  }
  return "unknown";
}

struct MomentRequirementReport {
  MomentRequirement kind;
  double residual;  // |Phi - Phi S^+ S|_F / |Phi|_F
  int rank;
};

// Checks that every row of Phi lies in the row space of S, i.e. Phi = R S
// for some d x k matrix R, so that moments are linear in q = S p.
// Takes a raw matrix so rescaled channels can be checked too.
inline MomentRequirementReport MomentRequirementCheck(const FeatureMap& fm,
                                                      const MatrixXd& sm) {
  Require(sm.cols() == fm.outcomes(), "MomentRequirementCheck: size mismatch");
  const int rank = NumericalRank(sm, 1e-10);
  const MatrixXd proj = Pinv(sm, 1e-10) * sm;
  const double scale = std::max(fm.phi().norm(), std::numeric_limits<double>::min());
  const double residual = (fm.phi() - fm.phi() * proj).norm() / scale;
  MomentRequirement kind = MomentRequirement::kInsufficient;
  if (rank == sm.cols()) {
    kind = MomentRequirement::kFullRank;
  } else if (residual < 1e-8) {
    kind = MomentRequirement::kFactors;
  }
  return {kind, residual, rank};
}

inline MomentRequirementReport MomentRequirementCheck(const FeatureMap& fm,
                                                      const ChannelMatrix& s) {
  return MomentRequirementCheck(fm, s.matrix());
}

}  // namespace linsup

#endif  // LINSUP_ESTIMATORS_HPP_
