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

#ifndef LINSUP_EXPFAM_HPP_
#define LINSUP_EXPFAM_HPP_

// Finite-support exponential families p(y) = exp(theta . phi(y) - A(theta)),
// evaluated by exact enumeration over the outcome space.

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "linsup/error.hpp"
#include "linsup/linalg.hpp"
#include "linsup/newton.hpp"
#include "linsup/rng.hpp"

namespace linsup {

// d x m matrix whose column y holds phi(y).
class FeatureMap {
 public:
  FeatureMap() = default;

  // `bound` states the c with phi entries in [0, c]; when omitted, the
  // tightest such c is used if every entry is nonnegative.
  explicit FeatureMap(MatrixXd phi, std::optional<double> bound = std::nullopt)
      : phi_(std::move(phi)) {
    Require(phi_.rows() >= 1 && phi_.cols() >= 1,
            "FeatureMap needs d >= 1 and m >= 1");
    Require(phi_.allFinite(), "FeatureMap entries must be finite");
    const double lo = phi_.minCoeff();
    const double hi = phi_.maxCoeff();
    if (bound) {
      Require(*bound > 0.0, "FeatureMap bound must be positive");
      bound_ = *bound;
      in_bound_ = lo >= 0.0 && hi <= *bound;
    } else if (lo >= 0.0) {
      bound_ = hi > 0.0 ? hi : 1.0;
      in_bound_ = true;
    }
    binary_ = ((phi_.array() == 0.0) || (phi_.array() == 1.0)).all();
  }

  const MatrixXd& phi() const { return phi_; }
  int dim() const { return static_cast<int>(phi_.rows()); }
  int outcomes() const { return static_cast<int>(phi_.cols()); }
  VectorXd column(int y) const { return phi_.col(y); }

  // The c of the [0, c] bound, or 0 when entries are not all nonnegative.
  double bound() const { return bound_; }
  bool in_bound() const { return in_bound_; }
  bool is_binary() const { return binary_; }

 private:
  MatrixXd phi_;
  double bound_ = 0.0;
  bool in_bound_ = false;
  bool binary_ = false;
};

struct Params {
  VectorXd theta;
};

struct MomentVector {
  VectorXd mu;
  long n = 0;  // sample count behind the estimate; 0 for population moments
};

// phi(1..4) = (0,0), (0,1), (1,0), (1,1): the two-bit model used throughout
// the efficiency study.
inline FeatureMap FourOutcomeFeatures() {
  MatrixXd phi(2, 4);
  phi << 0, 0, 1, 1,
         0, 1, 0, 1;
  return FeatureMap(phi, 1.0);
}

// Every binary vector of length d as a column, in bitmask order.
inline FeatureMap AllBinaryFeatures(int d) {
  Require(d >= 1 && d <= 20, "AllBinaryFeatures: d must be in [1, 20]");
  const int m = 1 << d;
  MatrixXd phi(d, m);
  for (int y = 0; y < m; ++y)
    for (int i = 0; i < d; ++i) phi(i, y) = (y >> i) & 1;
  return FeatureMap(phi, 1.0);
}

inline VectorXd Scores(const FeatureMap& fm, const VectorXd& theta) {
  Require(theta.size() == fm.dim(), "theta dimension does not match features");
  return fm.phi().transpose() * theta;
}

inline double LogPartition(const FeatureMap& fm, const Params& th) {
  return LogSumExp(Scores(fm, th.theta));
}

inline VectorXd Distribution(const FeatureMap& fm, const Params& th) {
  const VectorXd s = Scores(fm, th.theta);
  const double a = LogSumExp(s);
  return (s.array() - a).exp().matrix();
}

inline MomentVector MeanStats(const FeatureMap& fm, const Params& th) {
  return {fm.phi() * Distribution(fm, th), 0};
}

inline MatrixXd Covariance(const MatrixXd& phi, const VectorXd& p) {
  const VectorXd mu = phi * p;
  const MatrixXd centered = phi.colwise() - mu;
  return centered * p.asDiagonal() * centered.transpose();
}

inline MatrixXd FisherInfo(const FeatureMap& fm, const Params& th) {
  return Covariance(fm.phi(), Distribution(fm, th));
}

inline int SampleOutcome(const FeatureMap& fm, const Params& th, Rng& rng) {
  const VectorXd p = Distribution(fm, th);
  return SampleIndex(std::span<const double>(p.data(), p.size()), rng);
}

struct FitOptions {
  NewtonOptions newton;
  // Allowed violation of the affine constraints that every achievable
  // moment vector satisfies, relative to 1 + |mu|_inf.
  double affine_tol = 1e-8;
  std::optional<VectorXd> init;
};

namespace detail {

// Shared front end of the moment-matching fits. `curvature0` is the Hessian
// of the log-partition at a reference point where every outcome has mass,
// `gap0` the gradient mu - E[phi] there. Returns the basis of identifiable
// directions, or throws NonIdentifiable when mu moves along a direction the
// features cannot express.
inline MatrixXd IdentifiableBasis(const MatrixXd& curvature0, const VectorXd& gap0,
                                  const VectorXd& mu, double affine_tol) {
  SymmetricSplit split = SplitRange(curvature0, 1e-10);
  const double scale = 1.0 + mu.cwiseAbs().maxCoeff();
  for (int k = 0; k < split.null.cols(); ++k) {
    const double violation = split.null.col(k).dot(gap0);
    if (std::abs(violation) > affine_tol * scale) {
      throw NonIdentifiableError(
          "moments move along a feature direction with no variation "
          "(violation " + std::to_string(violation) + ")",
          split.null.col(k));
    }
  }
  return split.range;
}

}  // namespace detail

// Solves argmax_theta mu . theta - A(theta), i.e. finds theta with
// E_theta[phi] = mu. The solution is the minimum-norm one when centered
// phi is rank deficient.
inline Params FitFromMoments(const FeatureMap& fm, const MomentVector& mu,
                             const FitOptions& opts = {}) {
  Require(mu.mu.size() == fm.dim(), "moment dimension does not match features");
  Require(mu.mu.allFinite(), "moments must be finite");
  const int d = fm.dim();
  const VectorXd uniform = VectorXd::Constant(fm.outcomes(), 1.0 / fm.outcomes());
  const MatrixXd basis = detail::IdentifiableBasis(
      Covariance(fm.phi(), uniform), mu.mu - fm.phi() * uniform, mu.mu,
      opts.affine_tol);

  auto eval = [&](const VectorXd& theta, double* value, VectorXd* grad,
                  MatrixXd* hess) {
    const VectorXd s = fm.phi().transpose() * theta;
    const double a = LogSumExp(s);
    const VectorXd p = (s.array() - a).exp().matrix();
    *value = mu.mu.dot(theta) - a;
    *grad = mu.mu - fm.phi() * p;
    if (hess) *hess = -Covariance(fm.phi(), p);
  };
  const VectorXd x0 = opts.init ? *opts.init : VectorXd::Zero(d);
  NewtonResult r = MaximizeConcave(eval, x0, basis, opts.newton);
  if (!r.converged) {
    throw Error(ErrorCode::kNotInPolytope,
                "moment matching did not converge (gradient " +
                    std::to_string(r.grad_norm) + ", |theta| " +
                    std::to_string(r.x.norm()) +
                    "); moments are on or outside the marginal polytope");
  }
  return {r.x};
}

// Conditional exponential family with node features only: each position j
// of a sequence has p(y[j] = b | x[j] = a) proportional to
// exp(theta . f(a, b)), so the log-partition is a sum over positions.
class FactorizedModel {
 public:
  FactorizedModel() = default;

  // `features` is d x (V*K); column a*K + b holds f(a, b).
  FactorizedModel(int vocab, int labels, MatrixXd features)
      : vocab_(vocab), labels_(labels), features_(std::move(features)) {
    Require(vocab >= 1 && labels >= 1, "FactorizedModel needs V, K >= 1");
    Require(features_.cols() == static_cast<long>(vocab) * labels,
            "feature matrix must have V*K columns");
    Require(features_.rows() >= 1 && features_.allFinite(),
            "feature matrix must be finite with d >= 1");
  }

  int vocab() const { return vocab_; }
  int labels() const { return labels_; }
  int dim() const { return static_cast<int>(features_.rows()); }
  const MatrixXd& features() const { return features_; }

  auto block(int a) const { return features_.middleCols(static_cast<long>(a) * labels_, labels_); }

  VectorXd Conditional(int a, const VectorXd& theta) const {
    const VectorXd s = block(a).transpose() * theta;
    const double z = LogSumExp(s);
    return (s.array() - z).exp().matrix();
  }

  double PositionLogPartition(int a, const VectorXd& theta) const {
    return LogSumExp(VectorXd(block(a).transpose() * theta));
  }

  int Predict(int a, const VectorXd& theta) const {
    int best = 0;
    const VectorXd p = Conditional(a, theta);
    p.maxCoeff(&best);
    return best;
  }

 private:
  int vocab_ = 0;
  int labels_ = 0;
  MatrixXd features_;
};

struct FactorizedFitOptions {
  NewtonOptions newton{.grad_tol = 1e-6};
  double affine_tol = 1e-6;
  double l2 = 0.0;  // optional ridge penalty (l2/2)|theta|^2
  std::optional<VectorXd> init;
};

// Maximizes mu . theta - sum_a c_a log sum_b exp(theta . f(a, b)) - l2/2 |theta|^2
// where c_a is the average number of positions per example holding token a.
inline Params FactorizedFit(const FactorizedModel& model, const MomentVector& mu,
                            const VectorXd& avg_position_counts,
                            const FactorizedFitOptions& opts = {}) {
  Require(mu.mu.size() == model.dim(), "moment dimension does not match features");
  Require(avg_position_counts.size() == model.vocab(),
          "position counts must have one entry per token");
  const int d = model.dim();
  std::vector<int> active;
  for (int a = 0; a < model.vocab(); ++a)
    if (avg_position_counts[a] > 0.0) active.push_back(a);
  Require(!active.empty(), "FactorizedFit: no token has positive count");

  auto accumulate = [&](const VectorXd& theta, double* log_z, VectorXd* mean,
                        MatrixXd* curvature) {
    *log_z = 0.0;
    mean->setZero(d);
    if (curvature) curvature->setZero(d, d);
    for (int a : active) {
      const auto f = model.block(a);
      const VectorXd s = f.transpose() * theta;
      const double z = LogSumExp(s);
      const VectorXd p = (s.array() - z).exp().matrix();
      const double c = avg_position_counts[a];
      *log_z += c * z;
      const VectorXd m = f * p;
      *mean += c * m;
      if (curvature) {
        const MatrixXd centered = f.colwise() - m;
        curvature->noalias() += c * centered * p.asDiagonal() * centered.transpose();
      }
    }
  };

  MatrixXd basis;
  if (opts.l2 > 0.0) {
    basis = MatrixXd::Identity(d, d);
  } else {
    double z0 = 0.0;
    VectorXd m0;
    MatrixXd c0;
    accumulate(VectorXd::Zero(d), &z0, &m0, &c0);
    basis = detail::IdentifiableBasis(c0, mu.mu - m0, mu.mu, opts.affine_tol);
  }

  auto eval = [&](const VectorXd& theta, double* value, VectorXd* grad,
                  MatrixXd* hess) {
    double log_z = 0.0;
    VectorXd mean;
    accumulate(theta, &log_z, &mean, hess);
    *value = mu.mu.dot(theta) - log_z - 0.5 * opts.l2 * theta.squaredNorm();
    *grad = mu.mu - mean - opts.l2 * theta;
    if (hess) {
      *hess = -*hess;
      hess->diagonal().array() -= opts.l2;
    }
  };
  const VectorXd x0 = opts.init ? *opts.init : VectorXd::Zero(d);
  NewtonResult r = MaximizeConcave(eval, x0, basis, opts.newton);
  if (!r.converged) {
    throw Error(ErrorCode::kNotInPolytope,
                "factorized moment matching did not converge (gradient " +
                    std::to_string(r.grad_norm) + ")");
  }
  return {r.x};
}

}  // namespace linsup

#endif  // LINSUP_EXPFAM_HPP_
