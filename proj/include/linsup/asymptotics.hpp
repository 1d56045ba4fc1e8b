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

#ifndef LINSUP_ASYMPTOTICS_HPP_
#define LINSUP_ASYMPTOTICS_HPP_

// Asymptotic covariances of the marginal-likelihood and moment estimators,
// computed by exact enumeration, and a Monte Carlo harness that checks
// them against sqrt(n)(theta_hat - theta*).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "linsup/channels.hpp"
#include "linsup/error.hpp"
#include "linsup/estimators.hpp"
#include "linsup/expfam.hpp"
#include "linsup/linalg.hpp"
#include "linsup/parallel.hpp"
#include "linsup/rng.hpp"

namespace linsup {

struct CovarianceReport {
  MatrixXd fisher;
  MatrixXd sigma_marg;
  MatrixXd sigma_mom;
  MatrixXd h_matrix;  // E[cov[beta(o) | y]]
  double efficiency = 0.0;
};

inline void CheckChannelColumns(const MatrixXd& s, int m) {
  Require(s.cols() == m, "channel matrix must have one column per outcome");
  Require((s.array() >= 0.0).all(), "channel matrix entries must be nonnegative");
  for (int y = 0; y < m; ++y)
    Require(std::abs(s.col(y).sum() - 1.0) <= 1e-10, "channel column does not sum to 1");
}

// E[cov[phi(y) | o]] with y ~ p_theta, o ~ S(. | y).
inline MatrixXd ExpectedPosteriorCov(const FeatureMap& fm, const Params& theta,
                                     const MatrixXd& s) {
  CheckChannelColumns(s, fm.outcomes());
  const VectorXd p = Distribution(fm, theta);
  const VectorXd marginal = s * p;
  MatrixXd acc = MatrixXd::Zero(fm.dim(), fm.dim());
  for (int o = 0; o < s.rows(); ++o) {
    if (marginal[o] <= 0.0) continue;
    const VectorXd post = (s.row(o).transpose().array() * p.array()).matrix() / marginal[o];
    acc += marginal[o] * Covariance(fm.phi(), post);
  }
  return acc;
}

// cov[E[phi(y) | o]].
inline MatrixXd CovOfPosteriorMean(const FeatureMap& fm, const Params& theta,
                                   const MatrixXd& s) {
  CheckChannelColumns(s, fm.outcomes());
  const VectorXd p = Distribution(fm, theta);
  const VectorXd mu = fm.phi() * p;
  const VectorXd marginal = s * p;
  MatrixXd acc = MatrixXd::Zero(fm.dim(), fm.dim());
  for (int o = 0; o < s.rows(); ++o) {
    if (marginal[o] <= 0.0) continue;
    const VectorXd post = (s.row(o).transpose().array() * p.array()).matrix() / marginal[o];
    const VectorXd diff = fm.phi() * post - mu;
    acc += marginal[o] * diff * diff.transpose();
  }
  return acc;
}

// (I - E[cov[phi | o]])^{-1}.
inline MatrixXd SigmaMarg(const FeatureMap& fm, const Params& theta, const MatrixXd& s) {
  const MatrixXd fisher = FisherInfo(fm, theta);
  const MatrixXd info = fisher - ExpectedPosteriorCov(fm, theta, s);
  const double scale = std::max(fisher.cwiseAbs().maxCoeff(), 1e-300);
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(Symmetrize(info));
  if (!(eig.eigenvalues().minCoeff() > 1e-10 * scale)) {
    throw Error(ErrorCode::kSingularInformation,
                "observed information I - E[cov[phi|o]] is singular (min eigenvalue " +
                    std::to_string(eig.eigenvalues().minCoeff()) + ")");
  }
  return eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() *
         eig.eigenvectors().transpose();
}

// E[cov[beta(o) | y]] by enumeration of the channel's outputs.
inline MatrixXd ExpectedBetaCov(const FeatureMap& fm, const Params& theta,
                                const ChannelTable& t) {
  CheckChannelColumns(t.S, fm.outcomes());
  Require(t.beta.rows() == fm.dim() && t.beta.cols() == t.S.rows(),
          "channel table beta has the wrong shape");
  const VectorXd p = Distribution(fm, theta);
  MatrixXd acc = MatrixXd::Zero(fm.dim(), fm.dim());
  for (int y = 0; y < fm.outcomes(); ++y) {
    if (p[y] == 0.0) continue;
    acc += p[y] * Covariance(t.beta, t.S.col(y));
  }
  return Symmetrize(acc);
}

inline MatrixXd InverseFisher(const FeatureMap& fm, const Params& theta) {
  const MatrixXd fisher = FisherInfo(fm, theta);
  const double scale = std::max(fisher.cwiseAbs().maxCoeff(), 1e-300);
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(fisher);
  if (!(eig.eigenvalues().minCoeff() > 1e-10 * scale)) {
    throw Error(ErrorCode::kSingularInformation, "Fisher information is singular");
  }
  return eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() *
         eig.eigenvectors().transpose();
}

// I^{-1} + I^{-1} H I^{-1}.
inline MatrixXd SandwichWithFisher(const MatrixXd& fisher_inv, const MatrixXd& h) {
  return Symmetrize(fisher_inv + fisher_inv * h * fisher_inv);
}

inline MatrixXd SigmaMom(const FeatureMap& fm, const Params& theta, const ChannelTable& t) {
  return SandwichWithFisher(InverseFisher(fm, theta), ExpectedBetaCov(fm, theta, t));
}

// H for classic randomized response:
// (1-eps)/eps^2 cov_u[phi] + (1-eps)/eps E_p[(phi(y) - E_u[phi])^{x2}].
inline MatrixXd HRandomizedResponse(const FeatureMap& fm, const Params& theta,
                                    double epsilon, const VectorXd& base_u) {
  Require(epsilon > 0.0 && epsilon <= 1.0, "HRandomizedResponse: epsilon must be in (0, 1]");
  Require(base_u.size() == fm.outcomes(), "HRandomizedResponse: base distribution size");
  const VectorXd p = Distribution(fm, theta);
  const VectorXd mean_u = fm.phi() * base_u;
  MatrixXd spread = MatrixXd::Zero(fm.dim(), fm.dim());
  for (int y = 0; y < fm.outcomes(); ++y) {
    const VectorXd diff = fm.column(y) - mean_u;
    spread += p[y] * diff * diff.transpose();
  }
  return (1.0 - epsilon) / (epsilon * epsilon) * Covariance(fm.phi(), base_u) +
         (1.0 - epsilon) / epsilon * spread;
}

// H^cr for binary features under uniform coordinate sampling:
// d q(1-q)/(2q-1)^2 Id + E[d diag(phi)^2 - phi phi^T].
inline MatrixXd HCoordRelease(const FeatureMap& fm, const Params& theta, double alpha) {
  if (!fm.is_binary()) {
    throw Error(ErrorCode::kBoundViolation, "HCoordRelease requires binary features");
  }
  Require(alpha > 0.0, "HCoordRelease: alpha must be positive");
  const int d = fm.dim();
  const double q = FlipProb(alpha);
  const VectorXd p = Distribution(fm, theta);
  MatrixXd h = (d * q * (1.0 - q) / ((2.0 * q - 1.0) * (2.0 * q - 1.0))) *
               MatrixXd::Identity(d, d);
  for (int y = 0; y < fm.outcomes(); ++y) {
    const VectorXd f = fm.column(y);
    MatrixXd term = -f * f.transpose();
    term.diagonal() += d * f.cwiseAbs2();
    h += p[y] * term;
  }
  return h;
}

// H^pv = q(1-q)/(2q-1)^2 Id with q = q_{alpha / delta_bar}.
inline MatrixXd HPerValue(int d, double alpha, double delta_bar) {
  Require(alpha > 0.0 && delta_bar > 0.0, "HPerValue: alpha and delta_bar must be positive");
  const double q = FlipProb(alpha / delta_bar);
  if (q >= 1.0) return MatrixXd::Zero(d, d);
  return (q * (1.0 - q) / ((2.0 * q - 1.0) * (2.0 * q - 1.0))) * MatrixXd::Identity(d, d);
}

// Small-alpha approximations of the traces of H^cr and H^pv.
inline double ApproxTraceHCoordRelease(int d, double alpha, double delta_bar) {
  return 4.0 * d * d / (alpha * alpha) + delta_bar * (d - 1);
}

inline double ApproxTraceHPerValue(int d, double alpha, double delta_bar) {
  return 4.0 * d * delta_bar * delta_bar / (alpha * alpha);
}

// d^{-1} tr(Sigma_marg Sigma_mom^{-1}).
inline double Efficiency(const MatrixXd& sigma_marg, const MatrixXd& sigma_mom) {
  Require(sigma_marg.rows() == sigma_mom.rows(), "Efficiency: dimension mismatch");
  const MatrixXd inv = InverseSpd(sigma_mom, ErrorCode::kSingular, "Sigma_mom");
  return (sigma_marg * inv).trace() / sigma_marg.rows();
}

inline CovarianceReport Report(const FeatureMap& fm, const Params& theta,
                               const ChannelTable& t) {
  CovarianceReport r;
  r.fisher = FisherInfo(fm, theta);
  r.h_matrix = ExpectedBetaCov(fm, theta, t);
  r.sigma_mom = SandwichWithFisher(InverseFisher(fm, theta), r.h_matrix);
  r.sigma_marg = SigmaMarg(fm, theta, t.S);
  r.efficiency = Efficiency(r.sigma_marg, r.sigma_mom);
  return r;
}

// phi(y) = y in {0, 1} observed as o = [y, y + eta] with eta ~ N(0, noise_var)
// and beta(o) = (o[1] + o[2]) / 2. The output is continuous, so its
// conditional covariance is stated analytically rather than enumerated.
struct GaussianDuplicateObservation {
  double noise_var = 1.0;

  double ExpectedBetaCov() const { return noise_var / 4.0; }

  double Beta(double o1, double o2) const { return 0.5 * (o1 + o2); }

  // Sigma_marg = I^{-1} because y is recoverable from o[1], so the relative
  // efficiency is I^{-1} / (I^{-1} + I^{-2} E[cov]) = 1 / (1 + I^{-1} E[cov]).
  double RelativeEfficiency(double fisher) const {
    return 1.0 / (1.0 + ExpectedBetaCov() / fisher);
  }
};

enum class EstimatorKind { kMoment, kMarginalEm };

struct McOptions {
  long n = 100000;
  int trials = 200;
  std::uint64_t seed = 1;
  int threads = 1;
  EmOptions em;
  FitOptions fit;
};

struct McResult {
  MatrixXd covariance;             // sample covariance of sqrt(n)(theta_hat - theta*)
  std::vector<VectorXd> estimates;  // theta_hat per trial
};

// Monte Carlo covariance of sqrt(n)(theta_hat - theta*). Trial t draws its
// n observations from the stream (seed, t); since both estimators depend on
// the data only through output counts, outputs are drawn from the marginal
// S p_theta* directly.
inline McResult McCovariance(EstimatorKind estimator, const ChannelTable& t,
                             const FeatureMap& fm, const Params& theta_star,
                             const McOptions& opts) {
  Require(opts.n >= 1 && opts.trials >= 1, "McCovariance: n and trials must be positive");
  const VectorXd marginal = t.S * Distribution(fm, theta_star);
  std::vector<double> cdf(marginal.size());
  double acc = 0.0;
  for (int o = 0; o < marginal.size(); ++o) cdf[o] = (acc += marginal[o]);
  const ChannelMatrix channel(t.S);

  McResult res;
  res.estimates.resize(opts.trials);
  ParallelFor(opts.trials, opts.threads, [&](long trial) {
    Rng rng = MakeStream(opts.seed, {static_cast<std::uint64_t>(trial)});
    VectorXd counts = VectorXd::Zero(marginal.size());
    for (long i = 0; i < opts.n; ++i) {
      const double u = Uniform01(rng) * acc;
      auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
      long o = std::min<long>(it - cdf.begin(), static_cast<long>(cdf.size()) - 1);
      counts[o] += 1.0;
    }
    const EmpiricalObsDist q = EmpiricalObsDist::FromCounts(counts);
    try {
      if (estimator == EstimatorKind::kMoment) {
        res.estimates[trial] = MomentEstimate(t, q, fm, opts.fit).theta.theta;
      } else {
        res.estimates[trial] =
            EmMarginalMl(q, channel, fm, Params{VectorXd::Zero(fm.dim())}, opts.em).theta.theta;
      }
    } catch (const Error& e) {
      throw Error(e.code(), "trial " + std::to_string(trial) + ": " + e.what());
    }
  });

  const int d = fm.dim();
  MatrixXd dev(d, opts.trials);
  const double root_n = std::sqrt(static_cast<double>(opts.n));
  for (int k = 0; k < opts.trials; ++k)
    dev.col(k) = root_n * (res.estimates[k] - theta_star.theta);
  const VectorXd mean = dev.rowwise().mean();
  const MatrixXd centered = dev.colwise() - mean;
  res.covariance = centered * centered.transpose() / std::max(1, opts.trials - 1);
  return res;
}

inline double RelativeFrobeniusError(const MatrixXd& estimate, const MatrixXd& reference) {
  return (estimate - reference).norm() / reference.norm();
}

}  // namespace linsup

#endif  // LINSUP_ASYMPTOTICS_HPP_
