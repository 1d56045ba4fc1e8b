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

#include "linsup/harness.hpp"

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

namespace linsup::harness {
namespace {

csv::Table Parse(const std::string& text) {
  std::istringstream in(text);
  return csv::Read(in);
}

std::vector<std::vector<std::string>> Where(const csv::Table& t, const std::string& col,
                                   const std::string& value) {
  std::vector<std::vector<std::string>> out;
  const int c = t.Column(col);
  for (const auto& r : t.rows)
    if (r[c] == value) out.push_back(r);
  return out;
}

double Num(const csv::Table& t, const std::vector<std::string>& r, const std::string& col) {
  return csv::ParseDouble(r[t.Column(col)], 0);
}

TEST(ConfigTest, SeedIsRequired) {
  EXPECT_THROW(ResolveSeed(json::object(), std::nullopt), Error);
  EXPECT_THROW(ResolveSeed(json{{"seed", -3}}, std::nullopt), Error);
  EXPECT_EQ(ResolveSeed(json{{"seed", 9}}, std::nullopt), 9u);
  EXPECT_EQ(ResolveSeed(json{{"seed", 9}}, 4), 4u);
}

TEST(ConfigTest, BadFieldsAreRejected) {
  RunOptions o{1, 1};
  EXPECT_THROW(RunExperiment("efficiency-curve", json{{"epsilons", {0.5, -1.0}}}, o), Error);
  EXPECT_THROW(RunExperiment("efficiency-curve", json{{"epsilons", "many"}}, o), Error);
  EXPECT_THROW(RunExperiment("audit", json{{"channels", {"bogus"}}}, o), Error);
  EXPECT_THROW(RunExperiment("nope", json::object(), o), Error);
  EXPECT_THROW(RunExperiment("private-regression", json{{"schemes", {"fancy"}}}, o), Error);
}

TEST(EfficiencyCurveTest, PinnedRows) {
  const RunOutput out = RunExperiment("efficiency-curve", json::object(), {1, 2});
  EXPECT_EQ(out.errors, 0);
  const csv::Table t = Parse(out.csv);
  ASSERT_EQ(t.header, (std::vector<std::string>{"theta", "epsilon", "efficiency",
                                                "trace_sigma_marg", "trace_sigma_mom", "error"}));
  for (const auto& r : Where(t, "epsilon", "1")) EXPECT_NEAR(Num(t, r, "efficiency"), 1.0, 1e-12);
  for (const auto& r : Where(t, "theta", "0;0")) EXPECT_NEAR(Num(t, r, "efficiency"), 1.0, 1e-8);
  const auto curve = Where(t, "theta", "5;-1");
  ASSERT_EQ(curve.size(), 20u);
  for (std::size_t i = 1; i < curve.size(); ++i)
    EXPECT_GT(Num(t, curve[i], "efficiency"), Num(t, curve[i - 1], "efficiency"));
}

TEST(AuditTest, PerValueDimFourWithinAlpha) {
  const RunOutput out =
      RunExperiment("audit", json{{"channels", {"per_value"}}, {"dims", {4}}, {"alphas", {1.0}}}, {1, 1});
  const csv::Table t = Parse(out.csv);
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_LE(Num(t, t.rows[0], "max_log_ratio"), 1.0 + 1e-9);
  EXPECT_EQ(t.rows[0][t.Column("passes")], "1");
}

TEST(AuditTest, DefaultGridAllPass) {
  const RunOutput out = RunExperiment("audit", json::object(), {1, 4});
  EXPECT_EQ(out.errors, 0);
  const csv::Table t = Parse(out.csv);
  EXPECT_EQ(Where(t, "passes", "1").size(), t.rows.size());
  EXPECT_FALSE(Where(t, "channel", "mixed_regression").empty());
}

TEST(GeometryTest, DeterministicChannelsAgree) {
  const RunOutput out = RunExperiment("geometry", json::object(), {5, 3});
  EXPECT_EQ(out.errors, 0);
  const csv::Table t = Parse(out.csv);
  const auto em = Where(t, "check", "one_em_step");
  ASSERT_EQ(em.size(), 20u);
  for (const auto& r : em) EXPECT_LE(Num(t, r, "value"), 1e-8);
  for (const auto& r : Where(t, "check", "pinv_identity")) EXPECT_LE(Num(t, r, "value"), 1e-10);
  const auto ll = Where(t, "check", "inv_ll_sign_changes");
  ASSERT_EQ(ll.size(), 1u);
  EXPECT_GE(Num(t, ll[0], "value"), 1.0);
}

TEST(RegionCountTest, WindowOneFullTagsNearSupervised) {
  const json cfg = {{"window", 1},   {"tags_per_annotation", 0}, {"vocab", 30},
                    {"train", 10000}, {"annotations", {10000}},  {"trials", 1},
                    {"methods", {"moment", "supervised"}}};
  const RunOutput out = RunExperiment("region-count", cfg, {13, 2});
  ASSERT_EQ(out.errors, 0) << out.csv;
  const csv::Table t = Parse(out.csv);
  const double mom = Num(t, Where(t, "method", "moment")[0], "test_accuracy");
  const double sup = Num(t, Where(t, "method", "supervised")[0], "test_accuracy");
  EXPECT_GT(mom, sup - 0.02);
}

TEST(RegionCountTest, EmBudgetErrorIsRecorded) {
  const json cfg = {{"window", 3}, {"train", 200}, {"test", 50}, {"annotations", {50}},
                    {"trials", 1}, {"methods", {"em"}}, {"em_budget", 5}};
  const RunOutput out = RunExperiment("region-count", cfg, {1, 1});
  EXPECT_EQ(out.errors, 1);
  EXPECT_NE(out.csv.find("RegionTooLarge"), std::string::npos);
}

TEST(PrivateRegressionTest, ColumnsAndOlsRow) {
  const json cfg = {{"d", 3}, {"n", 20000}, {"n_test", 2000}, {"alphas", {1.0, 8.0}},
                    {"trials", 2}};
  const RunOutput out = RunExperiment("private-regression", cfg, {4, 2});
  EXPECT_EQ(out.errors, 0);
  const csv::Table t = Parse(out.csv);
  ASSERT_EQ(t.header, (std::vector<std::string>{"alpha", "trial", "scheme", "r2_paper",
                                                "r2_standard", "n", "error"}));
  EXPECT_EQ(t.rows.size(), 2u * (1 + 2 * 2));
  for (const auto& r : t.rows) {
    EXPECT_NEAR(Num(t, r, "r2_paper") + Num(t, r, "r2_standard"), 1.0, 1e-12);
    EXPECT_EQ(r[t.Column("n")], "20000");
  }
  const auto ols = Where(t, "scheme", "ols");
  ASSERT_EQ(ols.size(), 2u);
  EXPECT_EQ(ols[0][t.Column("alpha")], "inf");
  EXPECT_GT(Num(t, ols[0], "r2_standard"), 0.9);
}

TEST(PrivateRegressionTest, TinyMixedRunRecordsMissingCoordinate) {
  const json cfg = {{"d", 4}, {"n", 3}, {"n_test", 10}, {"alphas", {1.0}}, {"trials", 1},
                    {"schemes", {"mixed_coord"}}};
  const RunOutput out = RunExperiment("private-regression", cfg, {4, 1});
  EXPECT_EQ(out.errors, 1);
  EXPECT_NE(out.csv.find("MissingCoordinate"), std::string::npos);
}

TEST(McValidateTest, SmallRunHasFormulaTraces) {
  const json cfg = {{"n", 2000}, {"trials", 30},
                    {"channels", {{{"kind", "identity"}}, {{"kind", "classic_rr"}, {"epsilon", 0.5}}}}};
  const RunOutput out = RunExperiment("mc-validate", cfg, {2, 4});
  EXPECT_EQ(out.errors, 0) << out.csv;
  const csv::Table t = Parse(out.csv);
  EXPECT_EQ(t.rows.size(), 4u);
  // identity channel: both estimators are the supervised MLE
  const auto id = Where(t, "channel", "identity");
  EXPECT_DOUBLE_EQ(Num(t, id[0], "trace_formula"), Num(t, id[1], "trace_formula"));
  EXPECT_DOUBLE_EQ(Num(t, id[0], "trace_mc"), Num(t, id[1], "trace_mc"));
}

json SmallConfig(const std::string& kind) {
  if (kind == "mc-validate") return {{"n", 1000}, {"trials", 12}};
  if (kind == "region-count")
    return {{"train", 300}, {"test", 100}, {"annotations", {40, 120}}, {"trials", 2}};
  if (kind == "private-regression")
    return {{"d", 3}, {"n", 9000}, {"n_test", 500}, {"alphas", {0.5, 4.0}}, {"trials", 2}};
  return json::object();
}

TEST(DeterminismTest, ThreadCountDoesNotChangeOutput) {
  for (const std::string& kind : Subcommands()) {
    const json cfg = SmallConfig(kind);
    const RunOutput one = RunExperiment(kind, cfg, {77, 1});
    const RunOutput eight = RunExperiment(kind, cfg, {77, 8});
    EXPECT_EQ(one.csv, eight.csv) << kind;
    EXPECT_EQ(one.errors, 0) << kind;
    const RunOutput other_seed = RunExperiment(kind, cfg, {78, 8});
    if (kind != "efficiency-curve" && kind != "audit") EXPECT_NE(one.csv, other_seed.csv) << kind;
  }
}

TEST(ManifestTest, EchoesConfig) {
  const json cfg = {{"alphas", {1.0}}, {"seed", 3}};
  const RunOptions o{3, 2};
  const RunOutput out = RunExperiment("audit", cfg, o);
  const json m = Manifest("audit", cfg, o, out, "a.csv", 0.5);
  EXPECT_EQ(m["config"], cfg);
  EXPECT_EQ(m["version"], kVersion);
  EXPECT_EQ(m["rows"], out.rows);
  EXPECT_EQ(m["seed"], 3);
  EXPECT_TRUE(m.contains("wall_clock_seconds"));
}

}  // namespace
}  // namespace linsup::harness
