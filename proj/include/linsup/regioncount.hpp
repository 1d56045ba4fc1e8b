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

#ifndef LINSUP_REGIONCOUNT_HPP_
#define LINSUP_REGIONCOUNT_HPP_

// Count annotations over windows of a sequence, least-squares recovery of
// the per-token label conditionals w(a, b), and the factorized fits built
// on top of them.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "linsup/csv.hpp"
#include "linsup/error.hpp"
#include "linsup/expfam.hpp"
#include "linsup/linalg.hpp"
#include "linsup/parallel.hpp"
#include "linsup/rng.hpp"

namespace linsup {

struct SequenceExample {
  std::vector<int> tokens;
  std::vector<int> labels;  // empty when unknown

  int length() const { return static_cast<int>(tokens.size()); }
  bool labeled() const { return labels.size() == tokens.size(); }
};

using Corpus = std::vector<SequenceExample>;

// Positions are 0-based and `end` is inclusive.
struct RegionAnnotation {
  int seq = 0;
  int start = 0;
  int end = 0;
  std::vector<int> tags;
  std::vector<int> counts;  // counts[i] belongs to tags[i]

  int width() const { return end - start + 1; }
};

struct LocalConditional {
  MatrixXd w;                     // V x K
  std::vector<std::uint8_t> covered;  // a * K + b
  double residual = 0.0;          // sum of squared regression residuals
  long equations = 0;

  long uncovered() const {
    return static_cast<long>(std::count(covered.begin(), covered.end(), 0));
  }
};

inline void CheckCorpus(const Corpus& corpus, int vocab, int labels) {
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const SequenceExample& s = corpus[i];
    Require(s.length() >= 1, "sequence " + std::to_string(i) + " is empty");
    for (int a : s.tokens)
      Require(a >= 0 && a < vocab, "sequence " + std::to_string(i) + ": token out of range");
    for (int b : s.labels)
      Require(b >= 0 && b < labels, "sequence " + std::to_string(i) + ": label out of range");
  }
}

// ---- synthetic corpus ----

struct CorpusConfig {
  int vocab = 60;
  int labels = 3;
  int min_length = 8;
  int max_length = 20;
  double zipf_exponent = 1.0;
  double dirichlet = 0.5;
};

struct SyntheticWorld {
  CorpusConfig config;
  VectorXd token_probs;  // Zipf over token ids
  MatrixXd w_star;       // V x K, rows are distributions
  std::vector<std::string> words;
};

inline SyntheticWorld MakeWorld(const CorpusConfig& cfg, std::uint64_t seed) {
  Require(cfg.vocab >= 1 && cfg.labels >= 1, "corpus needs vocab and labels");
  Require(cfg.min_length >= 1 && cfg.max_length >= cfg.min_length, "bad length range");
  Require(cfg.dirichlet > 0.0, "dirichlet concentration must be positive");
  SyntheticWorld w{cfg, VectorXd(cfg.vocab), MatrixXd(cfg.vocab, cfg.labels), {}};
  for (int a = 0; a < cfg.vocab; ++a) w.token_probs[a] = std::pow(a + 1.0, -cfg.zipf_exponent);
  w.token_probs /= w.token_probs.sum();

  Rng rng = MakeStream(seed, {0x77});
  std::gamma_distribution<double> gamma(cfg.dirichlet, 1.0);
  for (int a = 0; a < cfg.vocab; ++a) {
    double total = 0.0;
    for (int b = 0; b < cfg.labels; ++b) total += (w.w_star(a, b) = gamma(rng));
    if (total <= 0.0) {
      w.w_star.row(a).setConstant(1.0 / cfg.labels);
    } else {
      w.w_star.row(a) /= total;
    }
  }
  // Short strings over a small alphabet so prefixes and suffixes repeat.
  const std::string alphabet = "aeiklmnorstu";
  std::set<std::string> seen;
  while (static_cast<int>(w.words.size()) < cfg.vocab) {
    const int len = UniformInt(rng, 3, 7);
    std::string s;
    for (int i = 0; i < len; ++i)
      s += alphabet[UniformInt(rng, 0, static_cast<int>(alphabet.size()) - 1)];
    if (seen.insert(s).second) w.words.push_back(s);
  }
  return w;
}

// Sequence i draws from stream (seed, split, i).
inline Corpus SampleCorpus(const SyntheticWorld& world, long n, std::uint64_t seed,
                           std::uint64_t split, int threads = 1) {
  Require(n >= 0, "SampleCorpus: negative size");
  const CorpusConfig& cfg = world.config;
  Corpus corpus(n);
  ParallelFor(n, threads, [&](long i) {
    Rng rng = MakeStream(seed, {split, static_cast<std::uint64_t>(i)});
    const int len = UniformInt(rng, cfg.min_length, cfg.max_length);
    SequenceExample& s = corpus[i];
    s.tokens.resize(len);
    s.labels.resize(len);
    for (int j = 0; j < len; ++j) {
      const int a = SampleIndex(
          std::span<const double>(world.token_probs.data(), world.token_probs.size()), rng);
      const VectorXd row = world.w_star.row(a).transpose();
      s.tokens[j] = a;
      s.labels[j] = SampleIndex(std::span<const double>(row.data(), row.size()), rng);
    }
  });
  return corpus;
}

// ---- annotations ----

struct AnnotationOptions {
  int window = 1;
  int tags_per_annotation = 1;  // 0 means the full tag set
  bool strict_start = false;    // starts in {0, ..., L-w-1} instead of {0, ..., L-w}
};

inline int CountTag(const SequenceExample& x, int start, int end, int b) {
  int n = 0;
  for (int j = start; j <= end; ++j) n += x.labels[j] == b;
  return n;
}

inline RegionAnnotation SampleAnnotation(int seq_id, const SequenceExample& x, int labels,
                                         const AnnotationOptions& opts, Rng& rng) {
  Require(x.labeled(), "SampleAnnotation: sequence has no labels");
  Require(opts.window >= 1, "SampleAnnotation: window must be positive");
  const int len = x.length();
  if (len <= opts.window) {
    throw Error(ErrorCode::kSequenceTooShort,
                "sequence " + std::to_string(seq_id) + " has length " + std::to_string(len) +
                    ", not longer than the window " + std::to_string(opts.window));
  }
  const int last_start = opts.strict_start ? len - opts.window - 1 : len - opts.window;
  RegionAnnotation r;
  r.seq = seq_id;
  r.start = UniformInt(rng, 0, last_start);
  r.end = r.start + opts.window - 1;
  const int size = opts.tags_per_annotation <= 0 ? labels
                                                 : std::min(opts.tags_per_annotation, labels);
  std::vector<int> all(labels);
  std::iota(all.begin(), all.end(), 0);
  if (size < labels) {
    // Partial Fisher-Yates: the first `size` entries are a uniform subset.
    for (int i = 0; i < size; ++i) std::swap(all[i], all[UniformInt(rng, i, labels - 1)]);
    all.resize(size);
    std::sort(all.begin(), all.end());
  }
  r.tags = all;
  for (int b : r.tags) r.counts.push_back(CountTag(x, r.start, r.end, b));
  return r;
}

// Annotation i goes to sequence i mod |corpus| and draws from stream
// (seed, key, i).
inline std::vector<RegionAnnotation> SampleAnnotations(const Corpus& corpus, long n,
                                                       int labels,
                                                       const AnnotationOptions& opts,
                                                       std::uint64_t seed,
                                                       std::uint64_t key = 0xa11,
                                                       int threads = 1) {
  Require(n == 0 || !corpus.empty(), "SampleAnnotations: empty corpus");
  std::vector<RegionAnnotation> out(n);
  ParallelFor(n, threads, [&](long i) {
    Rng rng = MakeStream(seed, {key, static_cast<std::uint64_t>(i)});
    const int s = static_cast<int>(i % static_cast<long>(corpus.size()));
    out[i] = SampleAnnotation(s, corpus[s], labels, opts, rng);
  });
  return out;
}

// ---- least squares for w ----

// One equation of the regression: sum_{j in region} w(x[j], tag) ~ response.
struct RegressionRow {
  int seq = 0;
  int start = 0;
  int end = 0;
  int tag = 0;
  double response = 0.0;
};

inline std::vector<RegressionRow> ObservedRows(const std::vector<RegionAnnotation>& annots) {
  std::vector<RegressionRow> rows;
  for (const RegionAnnotation& r : annots)
    for (std::size_t i = 0; i < r.tags.size(); ++i)
      rows.push_back({r.seq, r.start, r.end, r.tags[i], static_cast<double>(r.counts[i])});
  return rows;
}

// Responses replaced by E[N[b] | x, r] = sum_{j in r} w*(x[j], b).
inline std::vector<RegressionRow> PopulationRows(const std::vector<RegionAnnotation>& annots,
                                                 const Corpus& corpus,
                                                 const MatrixXd& w_star) {
  std::vector<RegressionRow> rows = ObservedRows(annots);
  for (RegressionRow& row : rows) {
    double e = 0.0;
    for (int j = row.start; j <= row.end; ++j) e += w_star(corpus[row.seq].tokens[j], row.tag);
    row.response = e;
  }
  return rows;
}

inline LocalConditional LsRecoverW(const std::vector<RegressionRow>& rows,
                                   const Corpus& corpus, int vocab, int labels,
                                   double ridge = 1e-8) {
  if (rows.empty()) throw Error(ErrorCode::kNoData, "LsRecoverW: no annotations");
  Require(vocab <= 20000, "LsRecoverW: vocabulary too large for dense normal equations");
  // Rows for different tags share no unknowns, so each tag is its own system.
  std::vector<MatrixXd> normal(labels, MatrixXd::Zero(vocab, vocab));
  std::vector<VectorXd> rhs(labels, VectorXd::Zero(vocab));
  std::map<int, double> n;
  for (const RegressionRow& row : rows) {
    Require(row.seq >= 0 && row.seq < static_cast<int>(corpus.size()), "row: bad sequence id");
    const SequenceExample& x = corpus[row.seq];
    Require(row.start >= 0 && row.end < x.length() && row.start <= row.end, "row: bad region");
    Require(row.tag >= 0 && row.tag < labels, "row: bad tag");
    n.clear();
    for (int j = row.start; j <= row.end; ++j) n[x.tokens[j]] += 1.0;
    for (const auto& [a, na] : n) {
      rhs[row.tag][a] += na * row.response;
      for (const auto& [a2, na2] : n) normal[row.tag](a, a2) += na * na2;
    }
  }

  LocalConditional out;
  out.w = MatrixXd::Zero(vocab, labels);
  out.covered.assign(static_cast<std::size_t>(vocab) * labels, 0);
  out.equations = static_cast<long>(rows.size());
  for (int b = 0; b < labels; ++b) {
    const MatrixXd& a_mat = normal[b];
    // Ridge solve restricted to the numerical range of the normal matrix,
    // then iterative refinement; null directions stay exactly zero, which
    // gives the minimum-norm least-squares solution.
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(a_mat);
    const VectorXd& ev = eig.eigenvalues();
    const double top = std::max(ev.maxCoeff(), 0.0);
    std::vector<int> keep;
    for (int i = 0; i < ev.size(); ++i)
      if (ev[i] > 1e-10 * top) keep.push_back(i);
    MatrixXd u(vocab, static_cast<long>(keep.size()));
    VectorXd inv(static_cast<long>(keep.size()));
    for (std::size_t i = 0; i < keep.size(); ++i) {
      u.col(i) = eig.eigenvectors().col(keep[i]);
      inv[i] = 1.0 / (ev[keep[i]] + ridge);
    }
    auto solve = [&](const VectorXd& r) -> VectorXd {
      return u * (inv.asDiagonal() * (u.transpose() * r));
    };
    VectorXd x = solve(rhs[b]);
    for (int it = 0; it < 100; ++it) {
      const VectorXd dx = solve(rhs[b] - a_mat * x);
      x += dx;
      if (dx.norm() <= 1e-15 * (1.0 + x.norm())) break;
    }
    out.w.col(b) = x;
    for (int a = 0; a < vocab; ++a)
      out.covered[static_cast<std::size_t>(a) * labels + b] = a_mat(a, a) > 0.0;
  }
  for (const RegressionRow& row : rows) {
    double pred = 0.0;
    for (int j = row.start; j <= row.end; ++j) pred += out.w(corpus[row.seq].tokens[j], row.tag);
    out.residual += (pred - row.response) * (pred - row.response);
  }
  return out;
}

// Euclidean projection of each row onto the probability simplex.
inline MatrixXd ProjectRowsToSimplex(const MatrixXd& w) {
  MatrixXd out(w.rows(), w.cols());
  std::vector<double> u(w.cols());
  for (int a = 0; a < w.rows(); ++a) {
    for (int b = 0; b < w.cols(); ++b) u[b] = w(a, b);
    std::sort(u.begin(), u.end(), std::greater<>());
    double cum = 0.0, tau = 0.0;
    for (int k = 0; k < static_cast<int>(u.size()); ++k) {
      cum += u[k];
      const double t = (cum - 1.0) / (k + 1);
      if (u[k] - t > 0.0) tau = t;
    }
    for (int b = 0; b < w.cols(); ++b) out(a, b) = std::max(w(a, b) - tau, 0.0);
  }
  return out;
}

// ---- features and moments ----

struct FeatureSet {
  bool word = true;
  bool prefix = false;  // first character
  bool suffix = false;  // last character
};

inline FactorizedModel BuildFeatureModel(const std::vector<std::string>& words, int labels,
                                         const FeatureSet& set) {
  const int vocab = static_cast<int>(words.size());
  Require(vocab >= 1 && labels >= 1, "BuildFeatureModel: empty vocabulary or tag set");
  Require(set.word || set.prefix || set.suffix, "BuildFeatureModel: no feature group");
  // value of each group for each word
  std::vector<std::vector<int>> groups;
  if (set.word) {
    std::vector<int> id(vocab);
    std::iota(id.begin(), id.end(), 0);
    groups.push_back(id);
  }
  auto by_char = [&](bool first) {
    std::map<char, int> index;
    std::vector<int> v(vocab);
    for (int a = 0; a < vocab; ++a) {
      Require(!words[a].empty(), "BuildFeatureModel: empty word string");
      const char c = first ? words[a].front() : words[a].back();
      auto it = index.emplace(c, static_cast<int>(index.size())).first;
      v[a] = it->second;
    }
    groups.push_back(v);
  };
  if (set.prefix) by_char(true);
  if (set.suffix) by_char(false);

  int dim = 0;
  std::vector<int> offset;
  for (const auto& g : groups) {
    offset.push_back(dim);
    dim += (*std::max_element(g.begin(), g.end()) + 1) * labels;
  }
  MatrixXd f = MatrixXd::Zero(dim, static_cast<long>(vocab) * labels);
  for (std::size_t g = 0; g < groups.size(); ++g)
    for (int a = 0; a < vocab; ++a)
      for (int b = 0; b < labels; ++b)
        f(offset[g] + groups[g][a] * labels + b, static_cast<long>(a) * labels + b) = 1.0;
  return FactorizedModel(vocab, labels, std::move(f));
}

// Average number of occurrences of each token per sequence.
inline VectorXd AverageTokenCounts(const Corpus& corpus, int vocab) {
  Require(!corpus.empty(), "AverageTokenCounts: empty corpus");
  VectorXd c = VectorXd::Zero(vocab);
  for (const SequenceExample& s : corpus)
    for (int a : s.tokens) c[a] += 1.0;
  return c / static_cast<double>(corpus.size());
}

// mu = E[sum_j sum_b w(x[j], b) f(x[j], b)], averaged over the corpus.
inline MomentVector MuFromW(const MatrixXd& w, const Corpus& corpus,
                            const FactorizedModel& model) {
  Require(w.rows() == model.vocab() && w.cols() == model.labels(), "MuFromW: shape mismatch");
  const VectorXd c = AverageTokenCounts(corpus, model.vocab());
  VectorXd mu = VectorXd::Zero(model.dim());
  for (int a = 0; a < model.vocab(); ++a)
    if (c[a] != 0.0) mu += c[a] * (model.block(a) * w.row(a).transpose());
  return {mu, static_cast<long>(corpus.size())};
}

inline MomentVector SupervisedMoments(const Corpus& corpus, const FactorizedModel& model) {
  Require(!corpus.empty(), "SupervisedMoments: empty corpus");
  VectorXd mu = VectorXd::Zero(model.dim());
  for (const SequenceExample& s : corpus) {
    Require(s.labeled(), "SupervisedMoments: unlabeled sequence");
    for (int j = 0; j < s.length(); ++j)
      mu += model.features().col(static_cast<long>(s.tokens[j]) * model.labels() + s.labels[j]);
  }
  return {mu / static_cast<double>(corpus.size()), static_cast<long>(corpus.size())};
}

// Per-position accuracy of argmax_b p(b | x[j]).
inline double Accuracy(const FactorizedModel& model, const Params& theta,
                       const Corpus& corpus) {
  std::vector<int> pred(model.vocab());
  for (int a = 0; a < model.vocab(); ++a) pred[a] = model.Predict(a, theta.theta);
  long hits = 0, total = 0;
  for (const SequenceExample& s : corpus) {
    Require(s.labeled(), "Accuracy: unlabeled sequence");
    for (int j = 0; j < s.length(); ++j) hits += pred[s.tokens[j]] == s.labels[j];
    total += s.length();
  }
  Require(total > 0, "Accuracy: no positions");
  return static_cast<double>(hits) / total;
}

// ---- moment pipeline ----

struct EndToEndOptions {
  double l2 = 1e-3;  // per position; scaled by the average sequence length
  bool project_simplex = false;
  double ridge = 1e-8;
};

struct EndToEndReport {
  LocalConditional w_hat;
  Params moment;
  Params supervised;
  double moment_train_accuracy = 0.0;
  double moment_test_accuracy = 0.0;
  double supervised_train_accuracy = 0.0;
  double supervised_test_accuracy = 0.0;
};

inline FactorizedFitOptions ScaledFitOptions(double l2, const VectorXd& counts) {
  FactorizedFitOptions fo;
  fo.l2 = l2 * counts.sum();
  return fo;
}

inline Params MomentPipelineFit(const std::vector<RegionAnnotation>& annots,
                                const Corpus& train, const FactorizedModel& model,
                                const EndToEndOptions& opts, LocalConditional* w_out) {
  if (annots.empty()) throw Error(ErrorCode::kNoData, "no annotations");
  LocalConditional w_hat =
      LsRecoverW(ObservedRows(annots), train, model.vocab(), model.labels(), opts.ridge);
  const MatrixXd w = opts.project_simplex ? ProjectRowsToSimplex(w_hat.w) : w_hat.w;
  const VectorXd counts = AverageTokenCounts(train, model.vocab());
  Params theta = FactorizedFit(model, MuFromW(w, train, model), counts,
                               ScaledFitOptions(opts.l2, counts));
  if (w_out) *w_out = std::move(w_hat);
  return theta;
}

inline Params SupervisedFit(const Corpus& train, const FactorizedModel& model, double l2) {
  const VectorXd counts = AverageTokenCounts(train, model.vocab());
  return FactorizedFit(model, SupervisedMoments(train, model), counts,
                       ScaledFitOptions(l2, counts));
}

inline EndToEndReport EndToEndFit(const Corpus& train, const Corpus& test,
                                  const std::vector<RegionAnnotation>& annots,
                                  const FactorizedModel& model,
                                  const EndToEndOptions& opts = {}) {
  EndToEndReport r;
  r.moment = MomentPipelineFit(annots, train, model, opts, &r.w_hat);
  r.supervised = SupervisedFit(train, model, opts.l2);
  r.moment_train_accuracy = Accuracy(model, r.moment, train);
  r.moment_test_accuracy = Accuracy(model, r.moment, test);
  r.supervised_train_accuracy = Accuracy(model, r.supervised, train);
  r.supervised_test_accuracy = Accuracy(model, r.supervised, test);
  return r;
}

// ---- exact marginal-likelihood EM ----

struct RegionEmOptions {
  int max_iterations = 200;
  double tol = 1e-9;           // stop once the objective gain drops below this
  double l2 = 1e-3;            // per annotated position
  long budget = 1'000'000;     // largest K^w enumerated
  std::function<void(int, const Params&)> on_iteration;  // called after each M-step
};

struct RegionEmResult {
  Params theta;
  std::vector<double> objective_trace;  // penalized average log P(N | x, r)
  int iterations = 0;
  bool converged = false;
};

namespace detail {

struct RegionPosterior {
  double log_likelihood = 0.0;
  MatrixXd marginals;  // w x K
};

// Enumerates every labeling of the region, keeps those matching the counts.
inline RegionPosterior EnumerateRegion(const FactorizedModel& model, const VectorXd& theta,
                                       const SequenceExample& x, const RegionAnnotation& r) {
  const int k = model.labels();
  const int w = r.width();
  std::vector<VectorXd> logp(w);
  for (int i = 0; i < w; ++i) {
    const int a = x.tokens[r.start + i];
    const VectorXd s = model.block(a).transpose() * theta;
    logp[i] = s.array() - LogSumExp(s);
  }
  std::vector<int> cfg(w, 0);
  std::vector<int> tally(k);
  std::vector<double> logw;
  std::vector<std::vector<int>> kept;
  while (true) {
    std::fill(tally.begin(), tally.end(), 0);
    for (int i = 0; i < w; ++i) ++tally[cfg[i]];
    bool ok = true;
    for (std::size_t t = 0; t < r.tags.size() && ok; ++t) ok = tally[r.tags[t]] == r.counts[t];
    if (ok) {
      double lw = 0.0;
      for (int i = 0; i < w; ++i) lw += logp[i][cfg[i]];
      logw.push_back(lw);
      kept.push_back(cfg);
    }
    int i = 0;
    while (i < w && ++cfg[i] == k) cfg[i++] = 0;
    if (i == w) break;
  }
  if (kept.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "annotation on sequence " + std::to_string(r.seq) + " has impossible counts");
  }
  RegionPosterior out;
  out.log_likelihood = LogSumExp(std::span<const double>(logw.data(), logw.size()));
  out.marginals = MatrixXd::Zero(w, k);
  for (std::size_t c = 0; c < kept.size(); ++c) {
    const double p = std::exp(logw[c] - out.log_likelihood);
    for (int i = 0; i < w; ++i) out.marginals(i, kept[c][i]) += p;
  }
  return out;
}

}  // namespace detail

inline RegionEmResult ExactMarginalEm(const Corpus& train,
                                      const std::vector<RegionAnnotation>& annots,
                                      const FactorizedModel& model,
                                      const RegionEmOptions& opts = {},
                                      const Params* init = nullptr) {
  if (annots.empty()) throw Error(ErrorCode::kNoData, "no annotations");
  for (const RegionAnnotation& r : annots) {
    Require(r.seq >= 0 && r.seq < static_cast<int>(train.size()), "annotation: bad sequence id");
    Require(r.start >= 0 && r.end < train[r.seq].length() && r.start <= r.end,
            "annotation: bad region");
    const double configs = std::pow(static_cast<double>(model.labels()), r.width());
    if (configs > static_cast<double>(opts.budget)) {
      throw Error(ErrorCode::kRegionTooLarge,
                  "K^w = " + std::to_string(configs) + " exceeds the enumeration budget " +
                      std::to_string(opts.budget));
    }
  }
  const double n = static_cast<double>(annots.size());
  // Positions outside each region sum out to 1, so only annotated positions
  // enter the complete-data likelihood.
  VectorXd counts = VectorXd::Zero(model.vocab());
  for (const RegionAnnotation& r : annots)
    for (int j = r.start; j <= r.end; ++j) counts[train[r.seq].tokens[j]] += 1.0 / n;
  FactorizedFitOptions fo = ScaledFitOptions(opts.l2, counts);

  RegionEmResult res;
  res.theta = init ? *init : Params{VectorXd::Zero(model.dim())};
  auto e_step = [&](const VectorXd& theta, VectorXd* mu) {
    double ll = 0.0;
    if (mu) mu->setZero(model.dim());
    for (const RegionAnnotation& r : annots) {
      const SequenceExample& x = train[r.seq];
      const detail::RegionPosterior post = detail::EnumerateRegion(model, theta, x, r);
      ll += post.log_likelihood / n;
      if (mu) {
        for (int i = 0; i < r.width(); ++i)
          *mu += model.block(x.tokens[r.start + i]) * post.marginals.row(i).transpose() / n;
      }
    }
    return ll - 0.5 * fo.l2 * theta.squaredNorm();
  };

  VectorXd mu;
  double obj = e_step(res.theta.theta, &mu);
  res.objective_trace.push_back(obj);
  for (int it = 0; it < opts.max_iterations; ++it) {
    fo.init = res.theta.theta;
    Params next = FactorizedFit(model, {mu, static_cast<long>(annots.size())}, counts, fo);
    VectorXd next_mu;
    const double next_obj = e_step(next.theta, &next_mu);
    if (next_obj < obj - 1e-9 * (1.0 + std::abs(obj))) {
      throw std::logic_error("region EM objective decreased from " + std::to_string(obj) +
                             " to " + std::to_string(next_obj));
    }
    res.theta = std::move(next);
    mu = std::move(next_mu);
    res.objective_trace.push_back(next_obj);
    res.iterations = it + 1;
    if (opts.on_iteration) opts.on_iteration(res.iterations, res.theta);
    const double gain = next_obj - obj;
    obj = next_obj;
    if (gain < opts.tol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

// ---- CSV ----

inline std::string WriteCorpusCsv(const Corpus& corpus) {
  csv::Writer w({"seq_id", "position", "token", "label"});
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const SequenceExample& s = corpus[i];
    for (int j = 0; j < s.length(); ++j) {
      w.Add(static_cast<long>(i), j, s.tokens[j],
            s.labeled() ? std::to_string(s.labels[j]) : std::string());
    }
  }
  return w.str();
}

// Rows must be grouped by sequence with positions 0, 1, ... in order. An
// empty label column marks an unlabeled sequence.
inline Corpus ReadCorpusCsv(std::istream& in) {
  const csv::Table t = csv::Read(in, {"seq_id", "position", "token", "label"});
  const int c_seq = t.Column("seq_id"), c_pos = t.Column("position");
  const int c_tok = t.Column("token"), c_lab = t.Column("label");
  Corpus corpus;
  long current = -1;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const long line = t.line_numbers[r];
    const long seq = csv::ParseInt(row[c_seq], line);
    const long pos = csv::ParseInt(row[c_pos], line);
    if (seq != current) {
      if (seq != static_cast<long>(corpus.size())) {
        throw Error(ErrorCode::kParse, "line " + std::to_string(line) +
                                           ": sequence ids must be 0, 1, ... in order");
      }
      corpus.emplace_back();
      current = seq;
    }
    SequenceExample& s = corpus.back();
    if (pos != s.length()) {
      throw Error(ErrorCode::kParse,
                  "line " + std::to_string(line) + ": positions must be consecutive from 0");
    }
    s.tokens.push_back(static_cast<int>(csv::ParseInt(row[c_tok], line)));
    if (!row[c_lab].empty()) {
      if (static_cast<int>(s.labels.size()) != s.length() - 1) {
        throw Error(ErrorCode::kParse,
                    "line " + std::to_string(line) + ": sequence mixes labeled and unlabeled rows");
      }
      s.labels.push_back(static_cast<int>(csv::ParseInt(row[c_lab], line)));
    }
  }
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (!corpus[i].labels.empty() && !corpus[i].labeled()) {
      throw Error(ErrorCode::kParse,
                  "sequence " + std::to_string(i) + " mixes labeled and unlabeled rows");
    }
  }
  return corpus;
}

inline std::string WriteAnnotationsCsv(const std::vector<RegionAnnotation>& annots) {
  csv::Writer w({"seq_id", "start", "end", "tag", "count"});
  for (const RegionAnnotation& r : annots)
    for (std::size_t i = 0; i < r.tags.size(); ++i) w.Add(r.seq, r.start, r.end, r.tags[i], r.counts[i]);
  return w.str();
}

// Consecutive rows with the same (seq_id, start, end) form one annotation.
inline std::vector<RegionAnnotation> ReadAnnotationsCsv(std::istream& in) {
  const csv::Table t = csv::Read(in, {"seq_id", "start", "end", "tag", "count"});
  const int c_seq = t.Column("seq_id"), c_start = t.Column("start"), c_end = t.Column("end");
  const int c_tag = t.Column("tag"), c_count = t.Column("count");
  std::vector<RegionAnnotation> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const long line = t.line_numbers[r];
    const int seq = static_cast<int>(csv::ParseInt(row[c_seq], line));
    const int start = static_cast<int>(csv::ParseInt(row[c_start], line));
    const int end = static_cast<int>(csv::ParseInt(row[c_end], line));
    const int tag = static_cast<int>(csv::ParseInt(row[c_tag], line));
    const int count = static_cast<int>(csv::ParseInt(row[c_count], line));
    if (end < start || count < 0 || count > end - start + 1) {
      throw Error(ErrorCode::kParse, "line " + std::to_string(line) + ": invalid region or count");
    }
    if (out.empty() || out.back().seq != seq || out.back().start != start || out.back().end != end)
      out.push_back({seq, start, end, {}, {}});
    out.back().tags.push_back(tag);
    out.back().counts.push_back(count);
  }
  return out;
}

}  // namespace linsup

#endif  // LINSUP_REGIONCOUNT_HPP_
