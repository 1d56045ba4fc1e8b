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

#ifndef LINSUP_HARNESS_HPP_
#define LINSUP_HARNESS_HPP_

// Experiment drivers. Each runner takes a JSON config, produces one CSV
// with a fixed column set and counts the rows that recorded an error.
// Rows are computed into per-index slots and emitted in grid order, so the
// output does not depend on the thread count.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "linsup/asymptotics.hpp"
#include "linsup/channels.hpp"
#include "linsup/csv.hpp"
#include "linsup/error.hpp"
#include "linsup/estimators.hpp"
#include "linsup/expfam.hpp"
#include "linsup/linalg.hpp"
#include "linsup/parallel.hpp"
#include "linsup/privreg.hpp"
#include "linsup/regioncount.hpp"
#include "linsup/rng.hpp"

#ifndef LINSUP_VERSION
#define LINSUP_VERSION "0.1.0"
#endif

namespace linsup::harness {

using json = nlohmann::json;

inline constexpr const char* kVersion = LINSUP_VERSION;

struct RunOptions {
  std::uint64_t seed = 0;
  int threads = 1;
};

struct RunOutput {
  std::string csv;
  long rows = 0;
  long errors = 0;
};

// ---- config helpers ----

template <typename T>
T Get(const json& cfg, const std::string& key, const T& fallback) {
  if (!cfg.contains(key) || cfg.at(key).is_null()) return fallback;
  try {
    return cfg.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, "config field '" + key + "': " + e.what());
  }
}

inline std::vector<double> PositiveGrid(const json& cfg, const std::string& key,
                                        const std::vector<double>& fallback) {
  const auto grid = Get(cfg, key, fallback);
  Require(!grid.empty(), "config grid '" + key + "' is empty");
  for (double v : grid)
    Require(std::isfinite(v) && v > 0.0, "config grid '" + key + "' needs positive values");
  return grid;
}

inline long PositiveInt(const json& cfg, const std::string& key, long fallback) {
  const long v = Get(cfg, key, fallback);
  Require(v >= 1, "config field '" + key + "' must be positive");
  return v;
}

// The seed may come from the config or the command line; one is required.
inline std::uint64_t ResolveSeed(const json& cfg, std::optional<std::uint64_t> cli_seed) {
  if (cli_seed) return *cli_seed;
  if (cfg.contains("seed") && cfg.at("seed").is_number_unsigned())
    return cfg.at("seed").get<std::uint64_t>();
  if (cfg.contains("seed") && cfg.at("seed").is_number_integer() && cfg.at("seed").get<long>() >= 0)
    return cfg.at("seed").get<std::uint64_t>();
  throw Error(ErrorCode::kInvalidArgument, "a nonnegative integer seed is required");
}

// CSV-safe error text.
inline std::string ErrorField(const std::exception& e) {
  std::string s = e.what();
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), '"', '\'');
  return s;
}

inline std::string JoinVector(const VectorXd& v) {
  std::string s;
  for (int i = 0; i < v.size(); ++i) s += (i ? ";" : "") + csv::Format(v[i]);
  return s;
}

// "four_outcome" (default), {"binary_dim": d} or {"phi": [[...], ...]} with
// one row per statistic.
inline FeatureMap ParseModel(const json& cfg) {
  if (!cfg.contains("model")) return FourOutcomeFeatures();
  const json& m = cfg.at("model");
  if (m.is_string()) {
    if (m.get<std::string>() == "four_outcome") return FourOutcomeFeatures();
    throw Error(ErrorCode::kInvalidArgument, "unknown model '" + m.get<std::string>() + "'");
  }
  if (m.contains("binary_dim")) return AllBinaryFeatures(m.at("binary_dim").get<int>());
  if (m.contains("phi")) {
    const auto rows = m.at("phi").get<std::vector<std::vector<double>>>();
    Require(!rows.empty() && !rows[0].empty(), "model.phi is empty");
    MatrixXd phi(rows.size(), rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      Require(rows[i].size() == rows[0].size(), "model.phi rows differ in length");
      for (std::size_t y = 0; y < rows[i].size(); ++y) phi(i, y) = rows[i][y];
    }
    return FeatureMap(phi);
  }
  throw Error(ErrorCode::kInvalidArgument, "model needs 'binary_dim' or 'phi'");
}

inline VectorXd ToVector(const std::vector<double>& v) {
  return Eigen::Map<const VectorXd>(v.data(), static_cast<long>(v.size()));
}

struct ChannelSpec {
  std::string kind;  // identity | classic_rr | coordinate_release | per_value
  double param = 1.0;  // epsilon for classic_rr, alpha otherwise
  std::optional<double> delta_bar;
};

inline ChannelSpec ParseChannel(const json& j) {
  ChannelSpec s;
  s.kind = Get<std::string>(j, "kind", "");
  if (s.kind == "classic_rr") {
    s.param = Get(j, "epsilon", 0.5);
  } else if (s.kind == "coordinate_release" || s.kind == "per_value") {
    s.param = Get(j, "alpha", 1.0);
    if (j.contains("delta_bar")) s.delta_bar = j.at("delta_bar").get<double>();
  } else if (s.kind == "identity") {
    s.param = 1.0;
  } else {
    throw Error(ErrorCode::kInvalidArgument, "unknown channel kind '" + s.kind + "'");
  }
  return s;
}

inline ChannelTable BuildTable(const ChannelSpec& s, const FeatureMap& fm) {
  if (s.kind == "identity") return IdentityTable(fm);
  if (s.kind == "classic_rr") return Tabulate(ClassicRR::Uniform(s.param, fm.outcomes()), fm);
  if (s.kind == "coordinate_release")
    return Tabulate(CoordinateRelease::Uniform(s.param, fm.dim()), fm);
  const PerValue pv = s.delta_bar ? PerValue(s.param, *s.delta_bar)
                                  : PerValue::ForFeatures(s.param, fm);
  return Tabulate(pv, fm);
}

// ---- efficiency-curve ----
// theta,epsilon,efficiency,trace_sigma_marg,trace_sigma_mom,error

inline std::vector<double> DefaultEpsilonGrid() {
  std::vector<double> g;
  for (int i = 1; i <= 20; ++i) g.push_back(0.05 * i);
  return g;
}

inline RunOutput RunEfficiencyCurve(const json& cfg, const RunOptions& opts) {
  const FeatureMap fm = ParseModel(cfg);
  const auto thetas = Get(cfg, "thetas", std::vector<std::vector<double>>{
                                             {2.0, -0.1}, {5.0, -1.0}, {0.0, 0.0}});
  const auto eps = PositiveGrid(cfg, "epsilons", DefaultEpsilonGrid());
  for (double e : eps) Require(e <= 1.0, "epsilons must lie in (0, 1]");
  for (const auto& t : thetas) Require(static_cast<int>(t.size()) == fm.dim(), "theta size");

  const long count = static_cast<long>(thetas.size() * eps.size());
  std::vector<std::vector<std::string>> rows(count);
  ParallelFor(count, opts.threads, [&](long idx) {
    const auto& th = thetas[idx / eps.size()];
    const double e = eps[idx % eps.size()];
    const Params theta{ToVector(th)};
    std::vector<std::string>& row = rows[idx];
    row = {JoinVector(theta.theta), csv::Format(e)};
    try {
      const CovarianceReport r = Report(fm, theta, Tabulate(ClassicRR::Uniform(e, fm.outcomes()), fm));
      row.insert(row.end(), {csv::Format(r.efficiency), csv::Format(r.sigma_marg.trace()),
                             csv::Format(r.sigma_mom.trace()), ""});
    } catch (const Error& err) {
      row.insert(row.end(), {"", "", "", ErrorField(err)});
    }
  });
  csv::Writer w({"theta", "epsilon", "efficiency", "trace_sigma_marg", "trace_sigma_mom", "error"});
  RunOutput out;
  for (const auto& r : rows) {
    w.AddRow(r);
    out.errors += !r.back().empty();
  }
  out.rows = count;
  out.csv = w.str();
  return out;
}

// ---- mc-validate ----
// channel,param,estimator,n,trials,rel_frobenius_error,trace_formula,trace_mc,error

inline json DefaultMcChannels() {
  return json::array({{{"kind", "identity"}},
                      {{"kind", "classic_rr"}, {"epsilon", 0.3}},
                      {{"kind", "classic_rr"}, {"epsilon", 0.5}},
                      {{"kind", "classic_rr"}, {"epsilon", 0.8}},
                      {{"kind", "per_value"}, {"alpha", 2.0}}});
}

inline RunOutput RunMcValidate(const json& cfg, const RunOptions& opts) {
  const FeatureMap fm = ParseModel(cfg);
  const Params theta{ToVector(Get(cfg, "theta", std::vector<double>{2.0, -0.1}))};
  Require(theta.theta.size() == fm.dim(), "theta size does not match the model");
  const long n = PositiveInt(cfg, "n", 100000);
  const int trials = static_cast<int>(PositiveInt(cfg, "trials", 200));
  const json channels = cfg.contains("channels") ? cfg.at("channels") : DefaultMcChannels();
  const auto estimators =
      Get(cfg, "estimators", std::vector<std::string>{"moment", "marginal"});

  csv::Writer w({"channel", "param", "estimator", "n", "trials", "rel_frobenius_error",
                 "trace_formula", "trace_mc", "error"});
  RunOutput out;
  long index = 0;
  for (const json& cj : channels) {
    const ChannelSpec spec = ParseChannel(cj);
    for (const std::string& est : estimators) {
      Require(est == "moment" || est == "marginal", "unknown estimator '" + est + "'");
      std::vector<std::string> row = {spec.kind, csv::Format(spec.param), est,
                                      std::to_string(n), std::to_string(trials)};
      try {
        const ChannelTable t = BuildTable(spec, fm);
        const CovarianceReport r = Report(fm, theta, t);
        McOptions mo;
        mo.n = n;
        mo.trials = trials;
        // both estimators of a channel see the same samples
        mo.seed = StreamSeed(opts.seed, {static_cast<std::uint64_t>(index)});
        mo.threads = opts.threads;
        const bool mom = est == "moment";
        const McResult mc = McCovariance(mom ? EstimatorKind::kMoment : EstimatorKind::kMarginalEm,
                                         t, fm, theta, mo);
        const MatrixXd& formula = mom ? r.sigma_mom : r.sigma_marg;
        row.insert(row.end(), {csv::Format(RelativeFrobeniusError(mc.covariance, formula)),
                               csv::Format(formula.trace()), csv::Format(mc.covariance.trace()),
                               ""});
      } catch (const Error& err) {
        row.insert(row.end(), {"", "", "", ErrorField(err)});
        ++out.errors;
      }
      w.AddRow(row);
      ++out.rows;
    }
    ++index;
  }
  out.csv = w.str();
  return out;
}

// ---- geometry ----
// check,trial,k,m,d,value,error
//   one_em_step: max |one EM step from 0 - KL projection of pinv| on a
//     deterministic channel
//   pinv_identity: max |S^T diag(S 1)^-1 - pinv(S)|
//   inv_ll_sign_changes: sign changes of second differences of the
//     marginal log-likelihood along theta on a 3-outcome channel

inline MatrixXd RandomDeterministicChannel(Rng& rng, int k, int m) {
  Require(k >= 1 && k <= m, "deterministic channel needs 1 <= k <= m");
  std::vector<int> assign(m);
  for (int y = 0; y < m; ++y) assign[y] = y < k ? y : UniformInt(rng, 0, k - 1);
  std::shuffle(assign.begin(), assign.end(), rng);
  MatrixXd s = MatrixXd::Zero(k, m);
  for (int y = 0; y < m; ++y) s(assign[y], y) = 1.0;
  return s;
}

inline MatrixXd InvLlChannel() {
  MatrixXd s(3, 3);
  s << 1.0 / 3, 1.0 / 6, 1.0 / 4,
       1.0 / 3, 1.0 / 6, 1.0 / 2,
       1.0 / 3, 2.0 / 3, 1.0 / 4;
  return s;
}

inline FeatureMap InvLlFeatures() {
  MatrixXd phi(1, 3);
  phi << 2, 1, 0;
  return FeatureMap(phi);
}

inline int InvLlSignChanges(double theta_star, double lo, double hi, int steps) {
  const FeatureMap fm = InvLlFeatures();
  const ChannelMatrix s(InvLlChannel());
  const EmpiricalObsDist q{s.matrix() * Distribution(fm, {VectorXd::Constant(1, theta_star)}), 0};
  std::vector<double> ll(steps + 1);
  for (int i = 0; i <= steps; ++i)
    ll[i] = MarginalLl({VectorXd::Constant(1, lo + (hi - lo) * i / steps)}, q, s, fm);
  int changes = 0, last = 0;
  for (int i = 1; i < steps; ++i) {
    const double second = ll[i + 1] - 2 * ll[i] + ll[i - 1];
    const int sign = second > 1e-12 ? 1 : (second < -1e-12 ? -1 : 0);
    if (sign != 0 && last != 0 && sign != last) ++changes;
    if (sign != 0) last = sign;
  }
  return changes;
}

inline RunOutput RunGeometry(const json& cfg, const RunOptions& opts) {
  const long trials = PositiveInt(cfg, "trials", 20);
  const int max_m = static_cast<int>(Get(cfg, "max_outcomes", 8L));
  Require(max_m >= 3, "max_outcomes must be at least 3");
  std::vector<std::vector<std::string>> rows(2 * trials);
  ParallelFor(trials, opts.threads, [&](long trial) {
    Rng rng = MakeStream(opts.seed, {static_cast<std::uint64_t>(trial)});
    const int m = UniformInt(rng, 3, max_m);
    const int k = UniformInt(rng, 2, m);
    const int d = UniformInt(rng, 1, std::max(1, std::min(k - 1, 3)));
    const MatrixXd s = RandomDeterministicChannel(rng, k, m);
    MatrixXd phi(d, m);
    for (int i = 0; i < d; ++i)
      for (int y = 0; y < m; ++y) phi(i, y) = 2 * Uniform01(rng) - 1;
    VectorXd q(k);
    for (int o = 0; o < k; ++o) q[o] = 0.1 + Uniform01(rng);
    q /= q.sum();
    const std::string ks = std::to_string(k), ms = std::to_string(m), ds = std::to_string(d);
    const std::string ts = std::to_string(trial);
    try {
      const FeatureMap fm(phi);
      const ChannelMatrix ch(s);
      const EmpiricalObsDist qd{q, 0};
      const Params em = OneEmStep({VectorXd::Zero(d)}, qd, ch, fm);
      const Params mom = KlProject(PinvRecover(qd, ch), fm);
      rows[2 * trial] = {"one_em_step", ts, ks, ms, ds,
                         csv::Format((em.theta - mom.theta).cwiseAbs().maxCoeff()), ""};
    } catch (const Error& err) {
      rows[2 * trial] = {"one_em_step", ts, ks, ms, ds, "", ErrorField(err)};
    }
    const MatrixXd closed = s.transpose() * s.rowwise().sum().cwiseInverse().asDiagonal();
    rows[2 * trial + 1] = {"pinv_identity", ts, ks, ms, ds,
                           csv::Format((closed - Pinv(s)).cwiseAbs().maxCoeff()), ""};
  });
  csv::Writer w({"check", "trial", "k", "m", "d", "value", "error"});
  RunOutput out;
  for (const auto& r : rows) {
    w.AddRow(r);
    out.errors += !r.back().empty();
  }
  const double theta_star = Get(cfg, "inv_ll_theta", 1.0);
  w.Add(std::string("inv_ll_sign_changes"), std::string(""), std::string("3"), std::string("3"),
        std::string("1"), static_cast<double>(InvLlSignChanges(theta_star, -10.0, 10.0, 400)),
        std::string(""));
  out.rows = static_cast<long>(rows.size()) + 1;
  out.csv = w.str();
  return out;
}

// ---- region-count ----
// annotations,trial,method,train_accuracy,test_accuracy,iterations,error

inline RunOutput RunRegionCount(const json& cfg, const RunOptions& opts) {
  CorpusConfig cc;
  cc.vocab = static_cast<int>(PositiveInt(cfg, "vocab", 40));
  cc.labels = static_cast<int>(PositiveInt(cfg, "labels", 3));
  cc.min_length = static_cast<int>(PositiveInt(cfg, "min_length", cc.min_length));
  cc.max_length = static_cast<int>(PositiveInt(cfg, "max_length", cc.max_length));
  AnnotationOptions ao;
  ao.window = static_cast<int>(PositiveInt(cfg, "window", 3));
  ao.tags_per_annotation = static_cast<int>(Get(cfg, "tags_per_annotation", 1L));
  ao.strict_start = Get(cfg, "strict_start", false);
  const long n_train = PositiveInt(cfg, "train", 5000);
  const long n_test = PositiveInt(cfg, "test", 2000);
  const auto grid = Get(cfg, "annotations", std::vector<long>{200, 1000, 5000});
  for (long a : grid) Require(a >= 1, "annotation counts must be positive");
  const long trials = PositiveInt(cfg, "trials", 3);
  const auto methods =
      Get(cfg, "methods", std::vector<std::string>{"moment", "supervised", "em"});
  for (const auto& m : methods)
    Require(m == "moment" || m == "supervised" || m == "em", "unknown method '" + m + "'");
  EndToEndOptions eo;
  eo.l2 = Get(cfg, "l2", eo.l2);
  eo.project_simplex = Get(cfg, "project_simplex", false);
  RegionEmOptions em;
  em.l2 = eo.l2;
  em.max_iterations = static_cast<int>(PositiveInt(cfg, "em_iterations", em.max_iterations));
  em.budget = Get(cfg, "em_budget", em.budget);

  const long cells = static_cast<long>(grid.size()) * trials;
  const std::size_t per = methods.size();
  std::vector<std::vector<std::string>> rows(cells * per);
  ParallelFor(cells, opts.threads, [&](long cell) {
    const long n_ann = grid[cell / trials];
    const long trial = cell % trials;
    const std::uint64_t tseed = StreamSeed(opts.seed, {static_cast<std::uint64_t>(trial)});
    const SyntheticWorld world = MakeWorld(cc, tseed);
    const Corpus train = SampleCorpus(world, n_train, tseed, 1);
    const Corpus test = SampleCorpus(world, n_test, tseed, 2);
    const FactorizedModel model = BuildFeatureModel(world.words, cc.labels, {});
    std::vector<RegionAnnotation> annots;
    std::string setup_error;
    try {
      annots = SampleAnnotations(train, n_ann, cc.labels, ao, tseed,
                                 0xa11 + static_cast<std::uint64_t>(n_ann));
    } catch (const Error& err) {
      setup_error = ErrorField(err);
    }
    for (std::size_t k = 0; k < per; ++k) {
      std::vector<std::string>& row = rows[cell * per + k];
      row = {std::to_string(n_ann), std::to_string(trial), methods[k]};
      if (!setup_error.empty()) {
        row.insert(row.end(), {"", "", "", setup_error});
        continue;
      }
      try {
        Params theta;
        int iterations = 0;
        if (methods[k] == "moment") {
          theta = MomentPipelineFit(annots, train, model, eo, nullptr);
        } else if (methods[k] == "supervised") {
          theta = SupervisedFit(train, model, eo.l2);
        } else {
          const RegionEmResult r = ExactMarginalEm(train, annots, model, em);
          theta = r.theta;
          iterations = r.iterations;
        }
        row.insert(row.end(), {csv::Format(Accuracy(model, theta, train)),
                               csv::Format(Accuracy(model, theta, test)),
                               std::to_string(iterations), ""});
      } catch (const Error& err) {
        row.insert(row.end(), {"", "", "", ErrorField(err)});
      }
    }
  });
  csv::Writer w({"annotations", "trial", "method", "train_accuracy", "test_accuracy",
                 "iterations", "error"});
  RunOutput out;
  for (const auto& r : rows) {
    w.AddRow(r);
    out.errors += !r.back().empty();
  }
  out.rows = static_cast<long>(rows.size());
  out.csv = w.str();
  return out;
}

// ---- private-regression ----
// alpha,trial,scheme,r2_paper,r2_standard,n,error
// One "ols" row per trial (alpha = inf) carries the non-private fit.

struct RegressionSplit {
  RegressionDataset train, test;
};

inline RegressionSplit LoadRegressionCsv(const std::string& path, double test_fraction) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kParse, "cannot open '" + path + "'");
  const auto [x, y] = ReadRegressionCsv(in);
  Require(test_fraction > 0.0 && test_fraction < 1.0, "test_fraction must lie in (0, 1)");
  const long n = x.rows();
  const long n_test = std::max(1L, static_cast<long>(std::floor(n * test_fraction)));
  Require(n - n_test >= 1, "not enough rows for a train/test split");
  RegressionSplit s;
  s.train = ScaleDataset(x.topRows(n - n_test), y.head(n - n_test));
  s.test = ApplyScaling(s.train.map, x.bottomRows(n_test), y.tail(n_test));
  return s;
}

inline RunOutput RunPrivateRegression(const json& cfg, const RunOptions& opts) {
  const auto alphas = PositiveGrid(cfg, "alphas", {0.5, 1.0, 2.0, 4.0, 8.0});
  const long trials = PositiveInt(cfg, "trials", 10);
  std::vector<PrivScheme> schemes;
  for (const auto& s : Get(cfg, "schemes", std::vector<std::string>{"per_value", "mixed_coord"}))
    schemes.push_back(ParseScheme(s));
  const double ridge = Get(cfg, "ridge", 1e-6);

  std::optional<RegressionSplit> file;
  SyntheticRegression model;
  RegressionDataset test;
  long n = 0;
  if (cfg.contains("data_csv")) {
    file = LoadRegressionCsv(cfg.at("data_csv").get<std::string>(), Get(cfg, "test_fraction", 0.2));
    test = file->test;
    n = file->train.n();
  } else {
    const int d = static_cast<int>(PositiveInt(cfg, "d", 8));
    n = PositiveInt(cfg, "n", 100000);
    model = MakeSyntheticRegression(d, Get(cfg, "noise_sd", 0.1), opts.seed);
    test = GenerateRegression(model, PositiveInt(cfg, "n_test", 10000), opts.seed, 0x7e57,
                              opts.threads);
  }

  csv::Writer w({"alpha", "trial", "scheme", "r2_paper", "r2_standard", "n", "error"});
  RunOutput out;
  auto emit = [&](const std::string& alpha, long trial, const std::string& scheme,
                  const std::optional<R2Score>& r2, const std::string& err) {
    w.AddRow({alpha, std::to_string(trial), scheme, r2 ? csv::Format(r2->paper) : "",
              r2 ? csv::Format(r2->standard) : "", std::to_string(n), err});
    ++out.rows;
    out.errors += !err.empty();
  };
  for (long trial = 0; trial < trials; ++trial) {
    const RegressionDataset train =
        file ? file->train
             : GenerateRegression(model, n, opts.seed, 0x1000 + static_cast<std::uint64_t>(trial),
                                  opts.threads);
    try {
      emit("inf", trial, "ols", ScoreR2(SolveMoments(ExactMoments(train), ridge), test.x, test.y),
           "");
    } catch (const Error& err) {
      emit("inf", trial, "ols", std::nullopt, ErrorField(err));
    }
    for (std::size_t s = 0; s < schemes.size(); ++s) {
      for (std::size_t a = 0; a < alphas.size(); ++a) {
        const std::uint64_t key = StreamSeed(0x9a, {static_cast<std::uint64_t>(trial), s, a});
        try {
          const MomentEstimates m =
              PrivateMoments(train, schemes[s], alphas[a], opts.seed, key, opts.threads);
          emit(csv::Format(alphas[a]), trial, SchemeName(schemes[s]),
               ScoreR2(SolveMoments(m, ridge), test.x, test.y), "");
        } catch (const Error& err) {
          emit(csv::Format(alphas[a]), trial, SchemeName(schemes[s]), std::nullopt,
               ErrorField(err));
        }
      }
    }
  }
  out.csv = w.str();
  return out;
}

// ---- audit ----
// channel,d,alpha,max_log_ratio,bound,passes,error
// alpha holds epsilon for classic_rr, whose bound is its DP level.

inline double AuditMixedRegression(int d, double alpha) {
  std::vector<VectorXd> xs;
  std::vector<double> ys;
  const double levels[] = {0.0, 0.5, 1.0};
  long total = 1;
  for (int i = 0; i <= d; ++i) total *= 3;
  for (long code = 0; code < total; ++code) {
    VectorXd x(d);
    long c = code;
    for (int i = 0; i < d; ++i, c /= 3) x[i] = levels[c % 3];
    xs.push_back(x);
    ys.push_back(levels[c % 3]);
  }
  return DpAudit(EnumerateScheme(PrivScheme::kMixedCoord, alpha, xs, ys).S);
}

inline RunOutput RunAudit(const json& cfg, const RunOptions& opts) {
  const auto kinds = Get(cfg, "channels",
                         std::vector<std::string>{"coordinate_release", "per_value",
                                                  "classic_rr", "mixed_regression"});
  const auto dims = Get(cfg, "dims", std::vector<int>{2, 4, 6});
  const auto alphas = PositiveGrid(cfg, "alphas", {0.1, 1.0, 5.0});
  const auto epsilons = PositiveGrid(cfg, "epsilons", {0.1, 0.5, 0.9});
  for (int d : dims) Require(d >= 1 && d <= 12, "audit dims must lie in [1, 12]");

  struct Point {
    std::string kind;
    int d;
    double param;
  };
  std::vector<Point> points;
  for (const auto& k : kinds) {
    Require(k == "coordinate_release" || k == "per_value" || k == "classic_rr" ||
                k == "mixed_regression",
            "unknown audit channel '" + k + "'");
    for (int d : dims) {
      if (k == "mixed_regression" && (d < 2 || d > 4)) continue;
      for (double p : k == "classic_rr" ? epsilons : alphas) points.push_back({k, d, p});
    }
  }
  std::vector<std::vector<std::string>> rows(points.size());
  ParallelFor(static_cast<long>(points.size()), opts.threads, [&](long i) {
    const Point& pt = points[i];
    std::vector<std::string>& row = rows[i];
    row = {pt.kind, std::to_string(pt.d), csv::Format(pt.param)};
    try {
      double ratio = 0.0, bound = pt.param;
      const FeatureMap fm = AllBinaryFeatures(pt.d);
      if (pt.kind == "coordinate_release") {
        ratio = DpAudit(CoordinateRelease::Uniform(pt.param, pt.d), fm);
      } else if (pt.kind == "per_value") {
        ratio = DpAudit(PerValue::ForFeatures(pt.param, fm), fm);
      } else if (pt.kind == "classic_rr") {
        const ClassicRR rr = ClassicRR::Uniform(pt.param, fm.outcomes());
        ratio = DpAudit(rr, fm);
        bound = rr.DpLevel();
      } else {
        ratio = AuditMixedRegression(pt.d, pt.param);
      }
      row.insert(row.end(), {csv::Format(ratio), csv::Format(bound),
                             ratio <= bound + 1e-9 ? "1" : "0", ""});
    } catch (const Error& err) {
      row.insert(row.end(), {"", "", "", ErrorField(err)});
    }
  });
  csv::Writer w({"channel", "d", "alpha", "max_log_ratio", "bound", "passes", "error"});
  RunOutput out;
  for (const auto& r : rows) {
    w.AddRow(r);
    out.errors += !r.back().empty();
  }
  out.rows = static_cast<long>(rows.size());
  out.csv = w.str();
  return out;
}

// ---- dispatch ----

inline const std::vector<std::string>& Subcommands() {
  static const std::vector<std::string> names = {"efficiency-curve", "mc-validate", "geometry",
                                                 "region-count", "private-regression", "audit"};
  return names;
}

inline RunOutput RunExperiment(const std::string& kind, const json& cfg, const RunOptions& opts) {
  Require(opts.threads >= 1, "threads must be positive");
  if (kind == "efficiency-curve") return RunEfficiencyCurve(cfg, opts);
  if (kind == "mc-validate") return RunMcValidate(cfg, opts);
  if (kind == "geometry") return RunGeometry(cfg, opts);
  if (kind == "region-count") return RunRegionCount(cfg, opts);
  if (kind == "private-regression") return RunPrivateRegression(cfg, opts);
  if (kind == "audit") return RunAudit(cfg, opts);
  throw Error(ErrorCode::kInvalidArgument, "unknown experiment '" + kind + "'");
}

inline json Manifest(const std::string& kind, const json& cfg, const RunOptions& opts,
                     const RunOutput& out, const std::string& csv_path, double seconds) {
  return {{"experiment", kind},
          {"version", kVersion},
          {"config", cfg},
          {"seed", opts.seed},
          {"threads", opts.threads},
          {"output", csv_path},
          {"rows", out.rows},
          {"errors", out.errors},
          {"wall_clock_seconds", seconds}};
}

}  // namespace linsup::harness

#endif  // LINSUP_HARNESS_HPP_
