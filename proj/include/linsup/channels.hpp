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

#ifndef LINSUP_CHANNELS_HPP_
#define LINSUP_CHANNELS_HPP_

// Supervision channels S(o | y) together with their debiasing observation
// functions beta, which satisfy E[beta(o) | y] = phi(y).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "linsup/error.hpp"
#include "linsup/expfam.hpp"
#include "linsup/rng.hpp"

namespace linsup {

using BitVector = std::vector<std::uint8_t>;

inline constexpr long kDefaultEnumerationBudget = 10'000'000;

// q_t = e^{t/2} / (1 + e^{t/2}); the keep probability of a flip channel
// whose log-likelihood ratio per coordinate is t/2.
inline double FlipProb(double t) {
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  return 1.0 / (1.0 + std::exp(-0.5 * t));
}

// Reveal y with probability epsilon, otherwise draw from base_u.
class ClassicRR {
 public:
  ClassicRR(double epsilon, VectorXd base_u)
      : epsilon_(epsilon), base_u_(std::move(base_u)) {
    Require(epsilon >= 0.0 && epsilon <= 1.0, "ClassicRR: epsilon must lie in [0, 1]");
    Require(base_u_.size() >= 1, "ClassicRR: base distribution is empty");
    Require((base_u_.array() >= 0.0).all() &&
                std::abs(base_u_.sum() - 1.0) <= 1e-12,
            "ClassicRR: base distribution must be a probability vector");
  }

  static ClassicRR Uniform(double epsilon, int m) {
    return ClassicRR(epsilon, VectorXd::Constant(m, 1.0 / m));
  }

  double epsilon() const { return epsilon_; }
  const VectorXd& base_u() const { return base_u_; }
  int outcomes() const { return static_cast<int>(base_u_.size()); }

  int Sample(int y, Rng& rng) const {
    Require(y >= 0 && y < outcomes(), "ClassicRR: y out of range");
    if (Bernoulli(rng, epsilon_)) return y;
    return SampleIndex(std::span<const double>(base_u_.data(), base_u_.size()), rng);
  }

  // (phi(o) - (1 - eps) E_u[phi]) / eps
  VectorXd Beta(const FeatureMap& fm, int o) const {
    Require(fm.outcomes() == outcomes(), "ClassicRR: feature map size mismatch");
    Require(o >= 0 && o < outcomes(), "ClassicRR: o out of range");
    if (epsilon_ <= 0.0) {
      throw Error(ErrorCode::kDegeneratePrivacy, "ClassicRR: epsilon = 0 reveals nothing");
    }
    return (fm.column(o) - (1.0 - epsilon_) * (fm.phi() * base_u_)) / epsilon_;
  }

  // eps / ((1 - eps) min_o u(o)): the level at which the mechanism is
  // differentially private.
  double DpLevel() const {
    if (epsilon_ == 0.0) return 0.0;
    if (outcomes() == 1) return 0.0;
    const double umin = base_u_.minCoeff();
    if (epsilon_ >= 1.0 || umin <= 0.0) {
      throw Error(ErrorCode::kInfinite, "ClassicRR: privacy level is infinite");
    }
    return epsilon_ / ((1.0 - epsilon_) * umin);
  }

  // k x m matrix with S(o | y) in row o, column y.
  MatrixXd Matrix() const {
    const int m = outcomes();
    MatrixXd s = (1.0 - epsilon_) * base_u_ * Eigen::RowVectorXd::Ones(m);
    s.diagonal().array() += epsilon_;
    return s;
  }

 private:
  double epsilon_;
  VectorXd base_u_;
};

struct BinarizedStat {
  double c = 1.0;
  BitVector bits;
};

// Draws bits[i] ~ Bernoulli(phi(y)[i] / c). Refuses features outside [0, c]
// instead of clipping them.
inline BinarizedStat Binarize(const FeatureMap& fm, int y, double c, Rng& rng) {
  Require(y >= 0 && y < fm.outcomes(), "Binarize: y out of range");
  Require(c > 0.0, "Binarize: bound c must be positive");
  BinarizedStat out{c, BitVector(fm.dim())};
  for (int i = 0; i < fm.dim(); ++i) {
    const double v = fm.phi()(i, y);
    if (v < 0.0 || v > c) {
      throw Error(ErrorCode::kBoundViolation,
                  "feature " + std::to_string(i) + " of outcome " + std::to_string(y) +
                      " is " + std::to_string(v) + ", outside [0, " + std::to_string(c) + "]");
    }
    out.bits[i] = Bernoulli(rng, v / c) ? 1 : 0;
  }
  return out;
}

struct CoordObservation {
  int j = 0;
  int bit = 0;
};

// Releases one coordinate j ~ p_cr of the binarized statistic, kept with
// probability q_alpha and flipped otherwise.
class CoordinateRelease {
 public:
  CoordinateRelease(double alpha, VectorXd p_cr, double c = 1.0)
      : alpha_(alpha), p_cr_(std::move(p_cr)), c_(c) {
    Require(alpha >= 0.0, "CoordinateRelease: alpha must be nonnegative");
    Require(c > 0.0, "CoordinateRelease: bound c must be positive");
    Require(p_cr_.size() >= 1 && (p_cr_.array() > 0.0).all() &&
                std::abs(p_cr_.sum() - 1.0) <= 1e-12,
            "CoordinateRelease: p_cr must be strictly positive and sum to 1");
  }

  static CoordinateRelease Uniform(double alpha, int d, double c = 1.0) {
    return CoordinateRelease(alpha, VectorXd::Constant(d, 1.0 / d), c);
  }

  double alpha() const { return alpha_; }
  double c() const { return c_; }
  double q() const { return FlipProb(alpha_); }
  int dim() const { return static_cast<int>(p_cr_.size()); }
  const VectorXd& p_cr() const { return p_cr_; }

  CoordObservation Sample(const BitVector& tilde, Rng& rng) const {
    Require(static_cast<int>(tilde.size()) == dim(), "CoordinateRelease: size mismatch");
    CoordObservation obs;
    obs.j = SampleIndex(std::span<const double>(p_cr_.data(), p_cr_.size()), rng);
    const int keep = Bernoulli(rng, q()) ? 1 : 0;
    obs.bit = keep ? tilde[obs.j] : 1 - tilde[obs.j];
    return obs;
  }

  VectorXd Beta(int j, int bit) const {
    const double qa = q();
    if (!(2.0 * qa - 1.0 > 0.0)) {
      throw Error(ErrorCode::kDegeneratePrivacy,
                  "CoordinateRelease: alpha = 0 makes the release pure noise");
    }
    Require(j >= 0 && j < dim(), "CoordinateRelease: j out of range");
    VectorXd out = VectorXd::Zero(dim());
    out[j] = (bit - 1.0 + qa) / (2.0 * qa - 1.0) * c_ / p_cr_[j];
    return out;
  }

  static int OutputIndex(int j, int bit) { return 2 * j + bit; }

 private:
  double alpha_;
  VectorXd p_cr_;
  double c_;
};

// Largest l1 norm of a binarized statistic over the support of the model.
inline int EnumeratedDelta(const FeatureMap& fm) {
  int best = 0;
  for (int y = 0; y < fm.outcomes(); ++y)
    best = std::max(best, static_cast<int>((fm.phi().col(y).array() > 0.0).count()));
  return best;
}

// Flips every coordinate of the binarized statistic independently, keeping
// each with probability q_{alpha / delta_bar}.
class PerValue {
 public:
  PerValue(double alpha, double delta_bar, double c = 1.0)
      : alpha_(alpha), delta_bar_(delta_bar), c_(c) {
    Require(alpha >= 0.0, "PerValue: alpha must be nonnegative");
    Require(delta_bar > 0.0, "PerValue: delta_bar must be positive");
    Require(c > 0.0, "PerValue: bound c must be positive");
  }

  // delta_bar set to the exact support bound of the model.
  static PerValue ForFeatures(double alpha, const FeatureMap& fm, double c = 1.0) {
    return PerValue(alpha, std::max(1, EnumeratedDelta(fm)), c);
  }

  double alpha() const { return alpha_; }
  double delta_bar() const { return delta_bar_; }
  double c() const { return c_; }
  double q() const { return FlipProb(alpha_ / delta_bar_); }

  BitVector Sample(const BitVector& tilde, Rng& rng) const {
    BitVector out(tilde.size());
    const double qk = q();
    for (std::size_t i = 0; i < tilde.size(); ++i)
      out[i] = Bernoulli(rng, qk) ? tilde[i] : 1 - tilde[i];
    return out;
  }

  VectorXd Beta(const BitVector& o_pv) const {
    const double qk = q();
    if (!(2.0 * qk - 1.0 > 0.0)) {
      throw Error(ErrorCode::kDegeneratePrivacy,
                  "PerValue: alpha = 0 makes the release pure noise");
    }
    VectorXd out(o_pv.size());
    for (std::size_t i = 0; i < o_pv.size(); ++i)
      out[i] = (o_pv[i] - 1.0 + qk) / (2.0 * qk - 1.0) * c_;
    return out;
  }

 private:
  double alpha_;
  double delta_bar_;
  double c_;
};

// A channel over an enumerable model written out in full: S(o | y) in
// row o, column y, and beta(o) in column o.
struct ChannelTable {
  MatrixXd S;
  MatrixXd beta;

  int outputs() const { return static_cast<int>(S.rows()); }
};

inline void CheckBudget(long terms, long budget, const std::string& what) {
  if (terms > budget) {
    throw Error(ErrorCode::kTooLarge, what + " needs " + std::to_string(terms) +
                                          " terms, over the budget of " +
                                          std::to_string(budget));
  }
}

inline ChannelTable IdentityTable(const FeatureMap& fm) {
  return {MatrixXd::Identity(fm.outcomes(), fm.outcomes()), fm.phi()};
}

inline ChannelTable Tabulate(const ClassicRR& ch, const FeatureMap& fm,
                             bool with_beta = true) {
  Require(fm.outcomes() == ch.outcomes(), "ClassicRR: feature map size mismatch");
  ChannelTable t{ch.Matrix(), MatrixXd()};
  if (with_beta) {
    t.beta.resize(fm.dim(), fm.outcomes());
    for (int o = 0; o < fm.outcomes(); ++o) t.beta.col(o) = ch.Beta(fm, o);
  }
  return t;
}

namespace detail {

inline void CheckBinarizable(const FeatureMap& fm, double c) {
  if ((fm.phi().array() < 0.0).any() || (fm.phi().array() > c).any()) {
    throw Error(ErrorCode::kBoundViolation,
                "features fall outside [0, " + std::to_string(c) + "]");
  }
}

}  // namespace detail

// Output (j, bit) has index 2j + bit. Binarization is marginalized:
// P(bit = 1 | y, j) = pi q + (1 - pi)(1 - q) with pi = phi(y)[j] / c.
inline ChannelTable Tabulate(const CoordinateRelease& ch, const FeatureMap& fm,
                             bool with_beta = true,
                             long budget = kDefaultEnumerationBudget) {
  Require(fm.dim() == ch.dim(), "CoordinateRelease: feature dimension mismatch");
  detail::CheckBinarizable(fm, ch.c());
  const int d = fm.dim();
  CheckBudget(2L * d * fm.outcomes(), budget, "coordinate release table");
  const double q = ch.q();
  ChannelTable t{MatrixXd::Zero(2 * d, fm.outcomes()), MatrixXd()};
  for (int y = 0; y < fm.outcomes(); ++y) {
    for (int j = 0; j < d; ++j) {
      const double pi = fm.phi()(j, y) / ch.c();
      const double one = pi * q + (1.0 - pi) * (1.0 - q);
      t.S(CoordinateRelease::OutputIndex(j, 1), y) = ch.p_cr()[j] * one;
      t.S(CoordinateRelease::OutputIndex(j, 0), y) = ch.p_cr()[j] * (1.0 - one);
    }
  }
  if (with_beta) {
    t.beta.resize(d, 2 * d);
    for (int j = 0; j < d; ++j)
      for (int bit = 0; bit < 2; ++bit)
        t.beta.col(CoordinateRelease::OutputIndex(j, bit)) = ch.Beta(j, bit);
  }
  return t;
}

inline BitVector MaskToBits(long mask, int d) {
  BitVector bits(d);
  for (int i = 0; i < d; ++i) bits[i] = (mask >> i) & 1;
  return bits;
}

// Output o_pv has index sum_i o_pv[i] 2^i. Coordinates are independent given
// y, so S(o | y) is a product of per-coordinate two-point laws.
inline ChannelTable Tabulate(const PerValue& ch, const FeatureMap& fm,
                             bool with_beta = true,
                             long budget = kDefaultEnumerationBudget) {
  const int d = fm.dim();
  Require(d <= 24, "PerValue table: dimension too large to enumerate");
  detail::CheckBinarizable(fm, ch.c());
  Require(ch.delta_bar() + 1e-12 >= EnumeratedDelta(fm),
          "PerValue: delta_bar is below the support's l1 bound " +
              std::to_string(EnumeratedDelta(fm)));
  const long k = 1L << d;
  CheckBudget(k * fm.outcomes(), budget, "per-value table");
  const double q = ch.q();
  ChannelTable t{MatrixXd(k, fm.outcomes()), MatrixXd()};
  VectorXd p_one(d);
  for (int y = 0; y < fm.outcomes(); ++y) {
    for (int i = 0; i < d; ++i) {
      const double pi = fm.phi()(i, y) / ch.c();
      p_one[i] = pi * q + (1.0 - pi) * (1.0 - q);
    }
    for (long o = 0; o < k; ++o) {
      double p = 1.0;
      for (int i = 0; i < d; ++i) p *= ((o >> i) & 1) ? p_one[i] : 1.0 - p_one[i];
      t.S(o, y) = p;
    }
  }
  if (with_beta) {
    t.beta.resize(d, k);
    for (long o = 0; o < k; ++o) t.beta.col(o) = ch.Beta(MaskToBits(o, d));
  }
  return t;
}

// max over (o, y, y') of log S(o | y) - log S(o | y'). Infinite when some
// output is possible under one input and impossible under another.
inline double DpAudit(const MatrixXd& s, long budget = kDefaultEnumerationBudget) {
  CheckBudget(static_cast<long>(s.rows()) * s.cols(), budget, "dp audit");
  double worst = 0.0;
  for (int o = 0; o < s.rows(); ++o) {
    const double hi = s.row(o).maxCoeff();
    const double lo = s.row(o).minCoeff();
    if (hi <= 0.0) continue;
    if (lo <= 0.0) return std::numeric_limits<double>::infinity();
    worst = std::max(worst, std::log(hi) - std::log(lo));
  }
  return worst;
}

template <typename Channel>
double DpAudit(const Channel& ch, const FeatureMap& fm,
               long budget = kDefaultEnumerationBudget) {
  if constexpr (std::is_same_v<Channel, ClassicRR>) {
    return DpAudit(Tabulate(ch, fm, false).S, budget);
  } else {
    return DpAudit(Tabulate(ch, fm, false, budget).S, budget);
  }
}

// E[beta(o) | y] for every y, column y; equals phi when beta is unbiased.
inline MatrixXd ConditionalMeanOfBeta(const ChannelTable& t) { return t.beta * t.S; }

}  // namespace linsup

#endif  // LINSUP_CHANNELS_HPP_
