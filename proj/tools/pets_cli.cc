// Copyright 2026 The PETS-cpp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line driver.
//
//   pets run --config cfg.json
//   pets ablate --config cfg.json
//   pets sweep-horizon --config cfg.json --horizons 5,15,25,50,100
//   pets export --run-dir runs/cartpole
//
// Output goes under $PETS_OUTPUT_ROOT (default ./runs). Exit status is 0 only
// when every seed of every run completed.

#include <cstdlib>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pets/harness/config.h"
#include "pets/harness/experiment.h"
#include "pets/harness/export.h"

namespace {

using namespace pets::harness;

constexpr int kIncomplete = 1;
constexpr int kUsage = 2;

void print_run(const RunResult& r) {
  for (const auto& s : r.seeds) {
    std::cout << "seed " << s.seed << ": " << (s.complete ? "complete" : "INCOMPLETE");
    if (!s.trials.empty()) std::cout << ", final reward " << s.final_reward();
    if (!s.error.empty()) std::cout << " (" << s.error << ")";
    std::cout << '\n';
  }
  const auto finals = r.final_rewards();
  if (!finals.empty()) std::cout << "median final reward " << median(finals) << '\n';
  std::cout << "logs in " << r.dir.string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Probabilistic-ensemble model-based RL experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string run_dir;
  std::vector<std::size_t> horizons;

  auto* run = app.add_subcommand("run", "Run the trial loop for every configured seed");
  run->add_option("--config", config_path, "Experiment JSON")->required()->check(CLI::ExistingFile);

  auto* ablate = app.add_subcommand("ablate", "Run the model x propagation grid");
  ablate->add_option("--config", config_path, "Experiment JSON")->required()->check(CLI::ExistingFile);

  auto* sweep = app.add_subcommand("sweep-horizon", "Repeat the experiment per planning horizon");
  sweep->add_option("--config", config_path, "Experiment JSON")->required()->check(CLI::ExistingFile);
  sweep->add_option("--horizons", horizons, "Comma-separated horizons (default: config sweep.horizons)")
      ->delimiter(',');

  auto* exp = app.add_subcommand("export", "Write curves.csv / curves.svg from persisted logs");
  exp->add_option("--run-dir", run_dir, "Run directory")->required()->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);

  try {
    if (exp->parsed()) {
      const std::size_t n = export_curves(run_dir);
      std::cout << "exported " << n << " run director" << (n == 1 ? "y" : "ies") << '\n';
      return n > 0 ? 0 : kIncomplete;
    }
    const ExperimentConfig cfg = load_config(config_path);
    const auto dir = resolve_run_dir(cfg);
    if (run->parsed()) {
      const RunResult r = run_experiment(cfg, dir);
      print_run(r);
      return r.all_complete() ? 0 : kIncomplete;
    }
    if (ablate->parsed()) {
      const AblationResult r = run_ablation(cfg, dir);
      for (const auto& c : r.cells) {
        std::cout << c.label;
        if (c.collapses_to != c.label) std::cout << " (= " << c.collapses_to << ")";
        std::cout << ": mean " << c.mean_final << ", median " << c.median_final
                  << (c.complete ? "" : " INCOMPLETE") << '\n';
      }
      std::cout << "summary in " << (r.dir / "summary.csv").string() << '\n';
      return r.all_complete() ? 0 : kIncomplete;
    }
    if (sweep->parsed()) {
      if (horizons.empty()) horizons = cfg.sweep.horizons;
      if (horizons.empty()) {
        std::cerr << "sweep-horizon: no horizons given\n";
        return kUsage;
      }
      const SweepResult r = run_horizon_sweep(cfg, horizons, dir);
      for (const auto& h : r.horizons) {
        std::cout << "H=" << h.horizon << ": median " << h.median_final << " [p5 " << h.p5
                  << ", p95 " << h.p95 << "]" << (h.complete ? "" : " INCOMPLETE") << '\n';
      }
      return r.all_complete() ? 0 : kIncomplete;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIncomplete;
  }
  return kUsage;
}
