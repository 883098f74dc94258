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

// Model-predictive control: optimize H steps against the model, execute the
// first action, shift the plan.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "pets/plan/optimizer.h"
#include "pets/propagate/models.h"
#include "pets/propagate/rollout.h"

namespace pets::plan {

// Mean over particles of summed rewards under cfg.propagation, P = cfg.particles.
double evaluate_candidate(const prop::DynamicsModel& model, std::span<const double> s0,
                          const nn::Matrix& actions, const PlannerConfig& cfg,
                          const prop::RewardFunction& reward, std::uint64_t seed);

// Candidate i (global index) is scored with seed derive_seed(base_seed, {i}).
Objective make_objective(const prop::DynamicsModel& model, std::span<const double> s0,
                         const PlannerConfig& cfg, const prop::RewardFunction& reward,
                         std::uint64_t base_seed);

struct MpcStepResult {
  std::vector<double> action;  // first action, clamped to bounds
  ActionPlan next_plan;
  OptimizeResult optimization;
  double elapsed_ms = 0.0;
};

// plan_prev must have cfg.horizon rows. One draw from rng seeds the step.
MpcStepResult mpc_step(const prop::DynamicsModel& model, std::span<const double> state,
                       const ActionPlan& plan_prev, const PlannerConfig& cfg,
                       const prop::RewardFunction& reward, Rng& rng);

// Left shift by one step; the freed last row gets the box midpoint. All
// variances reset to the initial (range / 4)^2.
ActionPlan shift_plan(const nn::Matrix& optimized_mean, std::span<const double> low,
                      std::span<const double> high);

// One JSON object per line: step, iteration_best, best_so_far, evaluations,
// warning, action, ms.
void write_trace_line(std::ostream& out, std::size_t step, const MpcStepResult& r);

}  // namespace pets::plan
