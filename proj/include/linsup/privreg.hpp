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

#ifndef LINSUP_PRIVREG_HPP_
#define LINSUP_PRIVREG_HPP_

// Locally private linear regression. Each record releases a noised version
// of its second-moment statistics x_i x_j (i <= j) and x_i y; the server
// debiases, aggregates and solves the normal equations.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "linsup/channels.hpp"
#include "linsup/csv.hpp"
#include "linsup/error.hpp"
#include "linsup/linalg.hpp"
#include "linsup/parallel.hpp"
#include "linsup/rng.hpp"

namespace linsup {

enum class PrivScheme { kPerValue, kMixedCoord };

inline const char* SchemeName(PrivScheme s) {
  return s == PrivScheme::kPerValue ? "per_value" : "mixed_coord";
}

inline PrivScheme ParseScheme(const std::string& name) {
  if (name == "per_value") return PrivScheme::kPerValue;
  if (name == "mixed_coord") return PrivScheme::kMixedCoord;
  throw Error(ErrorCode::kInvalidArgument, "unknown scheme '" + name + "'");
}

// Pair statistics (i, j), i <= j, in row-major order, then x_i y.
class StatLayout {
 public:
  explicit StatLayout(int d) : d_(d) { Require(d >= 1, "StatLayout: d must be positive"); }

  int d() const { return d_; }
  int pairs() const { return d_ * (d_ + 1) / 2; }
  int dim() const { return pairs() + d_; }

  int Pair(int i, int j) const {
    if (i > j) std::swap(i, j);
    return i * d_ - i * (i - 1) / 2 + (j - i);
  }
  int Cross(int i) const { return pairs() + i; }

  VectorXd Statistics(const VectorXd& x, double y) const {
    Require(x.size() == d_, "Statistics: feature dimension mismatch");
    VectorXd s(dim());
    for (int i = 0; i < d_; ++i)
      for (int j = i; j < d_; ++j) s[Pair(i, j)] = x[i] * x[j];
    for (int i = 0; i < d_; ++i) s[Cross(i)] = x[i] * y;
    return s;
  }

  // Probability that the mixed scheme releases each statistic.
  VectorXd MixedSelection() const {
    Require(d_ >= 2, "mixed scheme needs at least two features");
    VectorXd p(dim());
    for (int i = 0; i < d_; ++i) {
      p[Cross(i)] = 1.0 / (2.0 * d_);
      p[Pair(i, i)] = 1.0 / d_;
      for (int j = i + 1; j < d_; ++j) p[Pair(i, j)] = 1.0 / (d_ * (d_ - 1.0));
    }
    return p;
  }

 private:
  int d_;
};

struct PrivatizedStatSample {
  PrivScheme scheme = PrivScheme::kPerValue;
  std::vector<int> index;     // statistics released
  std::vector<double> value;  // debiased value of each
};

namespace detail {

inline BitVector BinarizeUnit(const VectorXd& s, Rng& rng) {
  BitVector bits(s.size());
  for (int i = 0; i < s.size(); ++i) {
    if (s[i] < 0.0 || s[i] > 1.0) {
      throw Error(ErrorCode::kBoundViolation,
                  "statistic " + std::to_string(i) + " = " + std::to_string(s[i]) +
                      " lies outside [0, 1]; scale the data first");
    }
    bits[i] = Bernoulli(rng, s[i]) ? 1 : 0;
  }
  return bits;
}

}  // namespace detail

inline PrivatizedStatSample PrivatizeRecord(const VectorXd& x, double y, PrivScheme scheme,
                                            double alpha, Rng& rng) {
  const StatLayout layout(static_cast<int>(x.size()));
  PrivatizedStatSample out;
  out.scheme = scheme;
  if (scheme == PrivScheme::kPerValue) {
    const VectorXd s = layout.Statistics(x, y);
    const PerValue ch(alpha, layout.dim());
    const VectorXd beta = ch.Beta(ch.Sample(detail::BinarizeUnit(s, rng), rng));
    out.index.resize(layout.dim());
    for (int k = 0; k < layout.dim(); ++k) out.index[k] = k;
    out.value.assign(beta.data(), beta.data() + beta.size());
    return out;
  }
  const int d = layout.d();
  Require(d >= 2, "mixed scheme needs at least two features");
  const int i = UniformInt(rng, 0, d - 1);
  VectorXd s;
  if (Bernoulli(rng, 0.5)) {
    out.index = {layout.Cross(i)};
    s = VectorXd::Constant(1, x[i] * y);
    const PerValue ch(alpha, 1.0);
    const VectorXd beta = ch.Beta(ch.Sample(detail::BinarizeUnit(s, rng), rng));
    out.value = {beta[0]};
  } else {
    int j = UniformInt(rng, 0, d - 2);
    if (j >= i) ++j;
    out.index = {layout.Pair(i, i), layout.Pair(i, j), layout.Pair(j, j)};
    s.resize(3);
    s << x[i] * x[i], x[i] * x[j], x[j] * x[j];
    const PerValue ch(alpha, 3.0);
    const VectorXd beta = ch.Beta(ch.Sample(detail::BinarizeUnit(s, rng), rng));
    out.value.assign(beta.data(), beta.data() + 3);
  }
  return out;
}

struct MomentEstimates {
  MatrixXd sxx;  // d x d, estimate of E[x x^T]
  VectorXd sxy;  // estimate of E[x y]
  long n = 0;
};

// Running sums of debiased payloads; mixed-scheme sums are reweighted by
// inverse selection probabilities in Finish().
class MomentAggregator {
 public:
  MomentAggregator(int d, PrivScheme scheme)
      : layout_(d), scheme_(scheme), sum_(VectorXd::Zero(layout_.dim())),
        fired_(layout_.dim(), 0) {}

  void Add(const PrivatizedStatSample& s) {
    Require(s.index.size() == s.value.size(), "sample index/value size mismatch");
    for (std::size_t k = 0; k < s.index.size(); ++k) {
      sum_[s.index[k]] += s.value[k];
      ++fired_[s.index[k]];
    }
    ++n_;
  }

  // One debiased value of statistic k; records are counted separately.
  void AddValue(int k, double v) {
    sum_[k] += v;
    ++fired_[k];
  }
  void CountRecord() { ++n_; }
  // `count` releases of statistic k with debiased values summing to `total`.
  void AddSum(int k, double total, long count) {
    sum_[k] += total;
    fired_[k] += count;
  }

  void Merge(const MomentAggregator& other) {
    sum_ += other.sum_;
    for (std::size_t k = 0; k < fired_.size(); ++k) fired_[k] += other.fired_[k];
    n_ += other.n_;
  }

  long n() const { return n_; }

  MomentEstimates Finish() const {
    if (n_ == 0) throw Error(ErrorCode::kNoData, "no privatized records");
    VectorXd est = sum_ / static_cast<double>(n_);
    if (scheme_ == PrivScheme::kMixedCoord) {
      for (int k = 0; k < layout_.dim(); ++k) {
        if (fired_[k] == 0) {
          throw Error(ErrorCode::kMissingCoordinate,
                      "statistic " + std::to_string(k) + " was never released in " +
                          std::to_string(n_) + " records");
        }
      }
      est = est.cwiseQuotient(layout_.MixedSelection());
    }
    return FromStatistics(layout_, est, n_);
  }

  static MomentEstimates FromStatistics(const StatLayout& layout, const VectorXd& est, long n) {
    const int d = layout.d();
    MomentEstimates m{MatrixXd(d, d), VectorXd(d), n};
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) m.sxx(i, j) = est[layout.Pair(i, j)];
      m.sxy[i] = est[layout.Cross(i)];
    }
    return m;
  }

 private:
  StatLayout layout_;
  PrivScheme scheme_;
  VectorXd sum_;
  std::vector<long> fired_;
  long n_ = 0;
};

// ---- datasets ----

struct ScalingMap {
  VectorXd x_min, x_range;  // x_range 0 marks a degenerate column
  double y_min = 0.0, y_range = 1.0;
};

struct RegressionDataset {
  MatrixXd x;  // n x d, in [0, 1]
  VectorXd y;
  ScalingMap map;
  std::vector<bool> degenerate;  // constant columns, mapped to 0

  int d() const { return static_cast<int>(x.cols()); }
  long n() const { return static_cast<long>(x.rows()); }
};

inline ScalingMap IdentityScaling(int d) {
  return {VectorXd::Zero(d), VectorXd::Ones(d), 0.0, 1.0};
}

inline RegressionDataset ApplyScaling(const ScalingMap& map, const MatrixXd& raw_x,
                                      const VectorXd& raw_y) {
  Require(raw_x.rows() == raw_y.size(), "ApplyScaling: row count mismatch");
  Require(raw_x.cols() == map.x_min.size(), "ApplyScaling: column count mismatch");
  RegressionDataset ds;
  ds.map = map;
  ds.x.resize(raw_x.rows(), raw_x.cols());
  ds.degenerate.assign(raw_x.cols(), false);
  for (int c = 0; c < raw_x.cols(); ++c) {
    if (map.x_range[c] == 0.0) {
      ds.degenerate[c] = true;
      ds.x.col(c).setZero();
    } else {
      ds.x.col(c) = ((raw_x.col(c).array() - map.x_min[c]) / map.x_range[c]).matrix();
    }
  }
  ds.y = map.y_range == 0.0 ? VectorXd::Zero(raw_y.size())
                            : VectorXd((raw_y.array() - map.y_min) / map.y_range);
  // Held-out rows may fall outside the training range.
  ds.x = ds.x.cwiseMax(0.0).cwiseMin(1.0);
  ds.y = ds.y.cwiseMax(0.0).cwiseMin(1.0);
  return ds;
}

// Per-column min-max scaling onto [0, 1].
inline RegressionDataset ScaleDataset(const MatrixXd& raw_x, const VectorXd& raw_y) {
  Require(raw_x.rows() >= 1, "ScaleDataset: need at least one row");
  Require(raw_x.rows() == raw_y.size(), "ScaleDataset: row count mismatch");
  Require(raw_x.allFinite() && raw_y.allFinite(), "ScaleDataset: non-finite value");
  ScalingMap map;
  map.x_min = raw_x.colwise().minCoeff().transpose();
  map.x_range = raw_x.colwise().maxCoeff().transpose() - map.x_min;
  map.y_min = raw_y.minCoeff();
  map.y_range = raw_y.maxCoeff() - map.y_min;
  return ApplyScaling(map, raw_x, raw_y);
}

inline MatrixXd UnscaleX(const ScalingMap& map, const MatrixXd& x) {
  MatrixXd out(x.rows(), x.cols());
  for (int c = 0; c < x.cols(); ++c)
    out.col(c) = (x.col(c).array() * map.x_range[c] + map.x_min[c]).matrix();
  return out;
}

inline VectorXd UnscaleY(const ScalingMap& map, const VectorXd& y) {
  return (y.array() * map.y_range + map.y_min).matrix();
}

struct RawCoefficients {
  VectorXd coef;
  double intercept = 0.0;
};

// Scaled-space model y_s = x_s^T w expressed on the original units.
inline RawCoefficients UnscaleCoefficients(const ScalingMap& map, const VectorXd& w) {
  RawCoefficients r{VectorXd::Zero(w.size()), map.y_min};
  for (int c = 0; c < w.size(); ++c) {
    if (map.x_range[c] == 0.0) continue;
    r.coef[c] = map.y_range * w[c] / map.x_range[c];
    r.intercept -= r.coef[c] * map.x_min[c];
  }
  return r;
}

// Header row, feature columns, then the response in the last column.
inline std::pair<MatrixXd, VectorXd> ReadRegressionCsv(std::istream& in) {
  const csv::Table t = csv::Read(in);
  Require(t.header.size() >= 2, "regression CSV needs at least one feature and a response");
  if (t.rows.empty()) throw Error(ErrorCode::kNoData, "regression CSV has no rows");
  const int d = static_cast<int>(t.header.size()) - 1;
  MatrixXd x(t.rows.size(), d);
  VectorXd y(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    for (int c = 0; c < d; ++c) x(r, c) = csv::ParseDouble(t.rows[r][c], t.line_numbers[r]);
    y[r] = csv::ParseDouble(t.rows[r][d], t.line_numbers[r]);
  }
  return {x, y};
}

// ---- synthetic data ----

struct SyntheticRegression {
  VectorXd w_star;  // positive, sums to 1, so x^T w* stays in [0, 1]
  double noise_sd = 0.1;
};

inline SyntheticRegression MakeSyntheticRegression(int d, double noise_sd, std::uint64_t seed) {
  Require(d >= 1 && noise_sd >= 0.0, "MakeSyntheticRegression: bad arguments");
  Rng rng = MakeStream(seed, {0x5e});
  SyntheticRegression s{VectorXd(d), noise_sd};
  for (int i = 0; i < d; ++i) s.w_star[i] = 0.2 + Uniform01(rng);
  s.w_star /= s.w_star.sum();
  return s;
}

inline constexpr long kRecordBlock = 4096;

// X uniform on [0,1]^d, Y = X w* + noise clipped to [0, 1]. Block b of rows
// draws from stream (seed, key, b).
inline RegressionDataset GenerateRegression(const SyntheticRegression& model, long n,
                                            std::uint64_t seed, std::uint64_t key,
                                            int threads = 1) {
  const int d = static_cast<int>(model.w_star.size());
  RegressionDataset ds;
  ds.x.resize(n, d);
  ds.y.resize(n);
  ds.map = IdentityScaling(d);
  ds.degenerate.assign(d, false);
  const long blocks = (n + kRecordBlock - 1) / kRecordBlock;
  ParallelFor(blocks, threads, [&](long b) {
    Rng rng = MakeStream(seed, {key, static_cast<std::uint64_t>(b)});
    std::normal_distribution<double> noise(0.0, model.noise_sd);
    const long end = std::min(n, (b + 1) * kRecordBlock);
    for (long r = b * kRecordBlock; r < end; ++r) {
      for (int c = 0; c < d; ++c) ds.x(r, c) = Uniform01(rng);
      const double e = model.noise_sd > 0.0 ? noise(rng) : 0.0;
      ds.y[r] = std::clamp(ds.x.row(r).dot(model.w_star) + e, 0.0, 1.0);
    }
  });
  return ds;
}

// ---- estimation ----

inline MomentEstimates ExactMoments(const RegressionDataset& ds) {
  Require(ds.n() >= 1, "ExactMoments: empty dataset");
  const double n = static_cast<double>(ds.n());
  return {ds.x.transpose() * ds.x / n, ds.x.transpose() * ds.y / n, ds.n()};
}

namespace detail {

// Debiased payload values for released bit 0 and 1 at keep probability q.
struct BitBeta {
  double q, lo, hi;

  explicit BitBeta(double q_keep) : q(q_keep) {
    if (!(2.0 * q - 1.0 > 0.0)) {
      throw Error(ErrorCode::kDegeneratePrivacy, "alpha = 0 makes the release pure noise");
    }
    lo = (q - 1.0) / (2.0 * q - 1.0);
    hi = q / (2.0 * q - 1.0);
  }

  // Binarize-then-flip collapsed to its output law:
  // P(bit = 1) = s q + (1 - s)(1 - q).
  template <typename Uniform>
  double Draw(double s, Uniform& uniform) const {
    if (s < 0.0 || s > 1.0) {
      throw Error(ErrorCode::kBoundViolation,
                  "statistic " + std::to_string(s) + " lies outside [0, 1]; scale the data first");
    }
    // branch-free select: the comparison is a coin flip
    return lo + (hi - lo) * static_cast<double>(uniform() < (1.0 - q) + s * (2.0 * q - 1.0));
  }
};

// Two 32-bit uniforms per engine call. The engine dominates the inner
// loop; 2^-32 resolution is far below the Monte Carlo error of any run.
class HalfWordUniform {
 public:
  explicit HalfWordUniform(Rng& rng) : rng_(rng) {}

  double operator()() {
    if (!have_) {
      word_ = rng_();
      have_ = true;
      return static_cast<double>(word_ >> 32) * 0x1.0p-32;
    }
    have_ = false;
    return static_cast<double>(word_ & 0xffffffffULL) * 0x1.0p-32;
  }

 private:
  Rng& rng_;
  std::uint64_t word_ = 0;
  bool have_ = false;
};

}  // namespace detail

// Privatizes every record; block b of records uses stream (seed, key, b).
// Same output law as PrivatizeRecord, without per-record allocation.
inline MomentEstimates PrivateMoments(const RegressionDataset& ds, PrivScheme scheme,
                                      double alpha, std::uint64_t seed, std::uint64_t key,
                                      int threads = 1) {
  const int d = ds.d();
  const StatLayout layout(d);
  if (scheme == PrivScheme::kMixedCoord) Require(d >= 2, "mixed scheme needs at least two features");
  const detail::BitBeta all(PerValue(alpha, layout.dim()).q());
  const detail::BitBeta one(PerValue(alpha, 1.0).q());
  const detail::BitBeta three(PerValue(alpha, 3.0).q());
  const long blocks = (ds.n() + kRecordBlock - 1) / kRecordBlock;
  std::vector<MomentAggregator> parts(blocks, MomentAggregator(d, scheme));
  ParallelFor(blocks, threads, [&](long b) {
    Rng rng = MakeStream(seed, {key, static_cast<std::uint64_t>(b)});
    detail::HalfWordUniform u(rng);
    MomentAggregator& agg = parts[b];
    const long end = std::min(ds.n(), (b + 1) * kRecordBlock);
    std::vector<double> x(d);
    std::vector<long> ones(scheme == PrivScheme::kPerValue ? layout.dim() : 0, 0);
    for (long r = b * kRecordBlock; r < end; ++r) {
      for (int i = 0; i < d; ++i) x[i] = ds.x(r, i);
      const double y = ds.y[r];
      agg.CountRecord();
      if (scheme == PrivScheme::kPerValue) {
        // entries in [0, 1] keep every product in [0, 1]
        bool in_range = y >= 0.0 && y <= 1.0;
        for (int i = 0; i < d; ++i) in_range &= x[i] >= 0.0 && x[i] <= 1.0;
        if (!in_range) all.Draw(-1.0, u);  // throws BoundViolation
        const double base = 1.0 - all.q, slope = 2.0 * all.q - 1.0;
        int k = 0;
        for (int i = 0; i < d; ++i)
          for (int j = i; j < d; ++j) ones[k++] += u() < base + x[i] * x[j] * slope;
        for (int i = 0; i < d; ++i) ones[k++] += u() < base + x[i] * y * slope;
        continue;
      }
      const int i = UniformInt(rng, 0, d - 1);
      if (Bernoulli(rng, 0.5)) {
        agg.AddValue(layout.Cross(i), one.Draw(x[i] * y, u));
      } else {
        int j = UniformInt(rng, 0, d - 2);
        if (j >= i) ++j;
        agg.AddValue(layout.Pair(i, i), three.Draw(x[i] * x[i], u));
        agg.AddValue(layout.Pair(i, j), three.Draw(x[i] * x[j], u));
        agg.AddValue(layout.Pair(j, j), three.Draw(x[j] * x[j], u));
      }
    }
    // per-value: every record releases every statistic, so the debiased sum
    // is ones * hi + (records - ones) * lo
    const long records = end - b * kRecordBlock;
    for (std::size_t k = 0; k < ones.size(); ++k) {
      agg.AddSum(static_cast<int>(k), ones[k] * all.hi + (records - ones[k]) * all.lo, records);
    }
  });
  MomentAggregator total(d, scheme);
  for (const MomentAggregator& p : parts) total.Merge(p);
  return total.Finish();
}

// w = (Sxx_+ + ridge I)^{-1} Sxy, where Sxx_+ floors negative eigenvalues
// of the (possibly indefinite) noisy estimate at zero.
inline VectorXd SolveMoments(const MomentEstimates& m, double ridge = 1e-6) {
  Require(m.sxx.rows() == m.sxy.size(), "SolveMoments: dimension mismatch");
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(Symmetrize(m.sxx));
  const VectorXd ev = eig.eigenvalues().cwiseMax(0.0).array() + ridge;
  if (!(ev.minCoeff() > 0.0) || ev.maxCoeff() / ev.minCoeff() > 1e12) {
    throw Error(ErrorCode::kSingular, "second-moment matrix condition number exceeds 1e12");
  }
  return eig.eigenvectors() * (eig.eigenvectors().transpose() * m.sxy).cwiseQuotient(ev);
}

struct R2Score {
  double paper = 0.0;     // |Xw - Y|^2 / |Y|^2
  double standard = 0.0;  // 1 - paper
};

inline R2Score ScoreR2(const VectorXd& w, const MatrixXd& x, const VectorXd& y) {
  Require(x.cols() == w.size() && x.rows() == y.size(), "ScoreR2: dimension mismatch");
  const double denom = y.squaredNorm();
  Require(denom > 0.0, "ScoreR2: response is identically zero");
  R2Score r;
  r.paper = (x * w - y).squaredNorm() / denom;
  r.standard = 1.0 - r.paper;
  return r;
}

// ---- enumeration for audits ----

// Exhaustive output table of a scheme for a set of records: S(o | record)
// in column r, and in `contribution` the inverse-probability-weighted
// debiased statistics each output adds to the estimate. For every record
// contribution * S.col(r) equals its statistic vector.
struct SchemeTable {
  MatrixXd S;
  MatrixXd contribution;  // D x outputs
};

inline SchemeTable EnumerateScheme(PrivScheme scheme, double alpha,
                                   const std::vector<VectorXd>& xs,
                                   const std::vector<double>& ys,
                                   long budget = kDefaultEnumerationBudget) {
  Require(!xs.empty() && xs.size() == ys.size(), "EnumerateScheme: records");
  const StatLayout layout(static_cast<int>(xs[0].size()));
  MatrixXd stats(layout.dim(), static_cast<long>(xs.size()));
  for (std::size_t r = 0; r < xs.size(); ++r) stats.col(r) = layout.Statistics(xs[r], ys[r]);
  if (scheme == PrivScheme::kPerValue) {
    const ChannelTable t = Tabulate(PerValue(alpha, layout.dim()), FeatureMap(stats), true, budget);
    return {t.S, t.beta};
  }
  const int d = layout.d();
  Require(d >= 2, "mixed scheme needs at least two features");
  const VectorXd pi = layout.MixedSelection();
  // outputs: (cross i, bit) then (ordered pair i != j, 3 bits)
  const long outputs = 2L * d + 8L * d * (d - 1);
  CheckBudget(outputs * static_cast<long>(xs.size()), budget, "mixed scheme table");
  SchemeTable t{MatrixXd::Zero(outputs, stats.cols()), MatrixXd::Zero(layout.dim(), outputs)};
  const PerValue one(alpha, 1.0), three(alpha, 3.0);
  const double q1 = one.q(), q3 = three.q();
  long o = 0;
  for (int i = 0; i < d; ++i) {
    for (int bit = 0; bit < 2; ++bit, ++o) {
      const int k = layout.Cross(i);
      t.contribution(k, o) = one.Beta({static_cast<std::uint8_t>(bit)})[0] / pi[k];
      for (long r = 0; r < stats.cols(); ++r) {
        const double p1 = stats(k, r) * q1 + (1 - stats(k, r)) * (1 - q1);
        t.S(o, r) = 0.5 / d * (bit ? p1 : 1 - p1);
      }
    }
  }
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      if (j == i) continue;
      const int idx[3] = {layout.Pair(i, i), layout.Pair(i, j), layout.Pair(j, j)};
      for (int mask = 0; mask < 8; ++mask, ++o) {
        const BitVector bits = MaskToBits(mask, 3);
        const VectorXd beta = three.Beta(bits);
        for (int c = 0; c < 3; ++c) t.contribution(idx[c], o) += beta[c] / pi[idx[c]];
        for (long r = 0; r < stats.cols(); ++r) {
          double p = 0.5 / d / (d - 1);
          for (int c = 0; c < 3; ++c) {
            const double p1 = stats(idx[c], r) * q3 + (1 - stats(idx[c], r)) * (1 - q3);
            p *= bits[c] ? p1 : 1 - p1;
          }
          t.S(o, r) = p;
        }
      }
    }
  }
  return t;
}

}  // namespace linsup

#endif  // LINSUP_PRIVREG_HPP_
