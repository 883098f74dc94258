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

#pragma once

// The trial loop: one random trial, then train-on-everything and MPC for each
// later trial. Per-seed logs land in <run_dir>/seed_<s>/:
//   trials.csv   trial, kind, reward, steps, dataset_size, truncated, model_mse, model_nll
//   steps.csv    trial, step, s_*, a_*, reward
//   dataset.csv  every recorded transition
//   timing.csv   trial, train_ms, plan_ms (wall clock, not reproducible)
//   model/       final-trial checkpoint
// plus <run_dir>/manifest.json. Everything except timing.csv and the
// planner trace is a pure function of (config, seed).

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pets/harness/config.h"

namespace pets::harness {

struct TrialRecord {
  std::size_t trial = 0;
  bool random = false;
  double reward = 0.0;
  std::size_t steps = 0;
  std::size_t dataset_size = 0;  // after this trial's data is added
  bool truncated = false;
  std::optional<double> model_mse;
  std::optional<double> model_nll;
  double train_ms = 0.0;
  double plan_ms = 0.0;
};

struct SeedResult {
  std::uint64_t seed = 0;
  bool complete = false;
  std::string error;
  std::vector<TrialRecord> trials;

  double final_reward() const;
  // Best trial reward among trials [0, k].
  double best_through(std::size_t k) const;
};

struct RunResult {
  std::filesystem::path dir;
  std::vector<SeedResult> seeds;

  bool all_complete() const;
  std::vector<double> final_rewards() const;
  std::vector<double> best_through(std::size_t k) const;
};

SeedResult run_seed(const ExperimentConfig& cfg, std::uint64_t seed,
                    const std::filesystem::path& seed_dir);
RunResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& run_dir);
RunResult run_experiment(const ExperimentConfig& cfg);  // at resolve_run_dir(cfg)

// --- Ablation ---------------------------------------------------------------
struct CellSummary {
  std::string label;        // e.g. "PE-TS1", with "@noise:<f>" when sweeping noise
  std::string collapses_to;  // equivalent cell for B = 1 models, else the label
  std::string environment;
  std::vector<double> final_rewards;
  double mean_final = 0.0;
  double median_final = 0.0;
  double iqr_final = 0.0;
  bool complete = false;
};

struct AblationResult {
  std::filesystem::path dir;
  std::vector<CellSummary> cells;  // sorted: mean desc, then median desc
  bool all_complete() const;
};

// "P-TSinf" -> "P-TS1", "D-MM" -> "D-E": what a cell reduces to when the
// model has one member. Ensemble cells map to themselves.
std::string collapsed_label(std::string_view label);

// Grid defaults to the fourteen standard cells when config.sweep.grid is empty.
AblationResult run_ablation(const ExperimentConfig& cfg, const std::filesystem::path& run_dir);
std::vector<std::string> default_grid();

// --- Horizon sweep ----------------------------------------------------------
struct HorizonSummary {
  std::size_t horizon = 0;
  std::vector<double> final_rewards;
  double median_final = 0.0;
  double p5 = 0.0;
  double p95 = 0.0;
  bool complete = false;
};

struct SweepResult {
  std::filesystem::path dir;
  std::vector<HorizonSummary> horizons;
  bool all_complete() const;
};

SweepResult run_horizon_sweep(const ExperimentConfig& cfg,
                              std::span<const std::size_t> horizons,
                              const std::filesystem::path& run_dir);

// --- Statistics -------------------------------------------------------------
double mean(std::span<const double> x);
double median(std::span<const double> x);
// Nearest-rank: the ceil(p/100 * n)-th smallest value (the minimum for p = 0).
double percentile(std::span<const double> x, double p);
// percentile 75 minus percentile 25.
double interquartile_range(std::span<const double> x);

}  // namespace pets::harness
