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

// Experiment configuration. The JSON document mirrors ExperimentConfig field
// for field; unknown keys are rejected.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "pets/dynmodel/ensemble.h"
#include "pets/plan/optimizer.h"

namespace pets::harness {

enum class DynamicsSource { kLearned, kGroundTruth };

struct SweepAxes {
  std::vector<std::size_t> horizons;
  std::vector<double> noise_fractions;
  // Cell labels "<class>-<propagation>", e.g. "PE-TS1", "D-E".
  std::vector<std::string> grid;
  bool operator==(const SweepAxes&) const = default;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::string environment = "cartpole";
  // kGroundTruth plans against the simulator itself: no random trial, no training.
  DynamicsSource dynamics = DynamicsSource::kLearned;
  dyn::ModelSpec model = default_model();
  plan::PlannerConfig planner = default_planner();
  std::size_t trials = 20;
  std::size_t task_horizon = 200;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  // Relative paths resolve under the output root; empty means `name`.
  std::string output_dir;
  // Seeds (or grid cells) run concurrently on this many workers.
  std::size_t threads = 1;
  SweepAxes sweep;
  bool save_checkpoints = true;  // final-trial model of each seed
  bool diagnostics = true;       // MSE / NLL of each trial's model on that trial
  bool planner_trace = false;    // JSON lines per MPC step (carries wall-clock)

  static dyn::ModelSpec default_model();
  static plan::PlannerConfig default_planner();

  void validate() const;
  bool operator==(const ExperimentConfig&) const = default;
};

ExperimentConfig config_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::filesystem::path& path);

// Compact, key-sorted serialization of to_json(cfg).
std::string canonical_json(const ExperimentConfig& cfg);
// FNV-1a 64 of canonical_json, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

// PETS_OUTPUT_ROOT if set, otherwise "runs".
std::filesystem::path output_root();
std::filesystem::path resolve_run_dir(const ExperimentConfig& cfg);

// Version string written into manifests.
std::string_view code_version();

}  // namespace pets::harness
