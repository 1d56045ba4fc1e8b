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

// Command-line front end for the experiment runners.
//
//   linsup <subcommand> [--config PATH] [--seed N] [--out PATH] [--threads N]
//
// Writes the CSV to --out and a run manifest next to it
// (<out without extension>.manifest.json). Exit code 1 if any row recorded
// an error, 2 on bad usage or config.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "linsup/harness.hpp"

namespace {

using linsup::harness::json;

json LoadConfig(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw linsup::Error(linsup::ErrorCode::kParse, "cannot open config '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw linsup::Error(linsup::ErrorCode::kParse, "config '" + path + "': " + e.what());
  }
}

void WriteFile(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw linsup::Error(linsup::ErrorCode::kParse, "cannot write '" + path.string() + "'");
}

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> threads;
};

int RunSubcommand(const std::string& name, const Flags& flags) {
  json cfg = LoadConfig(flags.config);
  if (flags.seed) cfg["seed"] = *flags.seed;
  if (flags.threads) cfg["threads"] = *flags.threads;
  if (!flags.out.empty()) cfg["out"] = flags.out;

  linsup::harness::RunOptions opts;
  opts.seed = linsup::harness::ResolveSeed(cfg, std::nullopt);
  opts.threads = linsup::harness::Get(cfg, "threads", 1);
  const std::filesystem::path csv_path = linsup::harness::Get<std::string>(cfg, "out", name + ".csv");

  const auto start = std::chrono::steady_clock::now();
  const linsup::harness::RunOutput out = linsup::harness::RunExperiment(name, cfg, opts);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  WriteFile(csv_path, out.csv);
  std::filesystem::path manifest = csv_path;
  manifest.replace_extension(".manifest.json");
  WriteFile(manifest,
            linsup::harness::Manifest(name, cfg, opts, out, csv_path.string(), seconds).dump(2) + "\n");
  std::cerr << name << ": " << out.rows << " rows, " << out.errors << " errors -> "
            << csv_path.string() << "\n";
  return out.errors > 0 ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Moment and marginal-likelihood estimators under indirect supervision"};
  app.require_subcommand(1);
  Flags flags;
  for (const std::string& name : linsup::harness::Subcommands()) {
    CLI::App* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--config", flags.config, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", flags.seed, "root seed (overrides the config)");
    sub->add_option("--out", flags.out, "output CSV path (overrides the config)");
    sub->add_option("--threads", flags.threads, "worker threads")->check(CLI::PositiveNumber);
  }
  CLI11_PARSE(app, argc, argv);
  try {
    return RunSubcommand(app.get_subcommands().front()->get_name(), flags);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
