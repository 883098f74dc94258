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

// Action-sequence optimizers: CEM with per-dimension Gaussians clamped to the
// action box, and uniform random shooting.

#include <cstddef>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "pets/common/rng.h"
#include "pets/diffnet/matrix.h"
#include "pets/propagate/rollout.h"

namespace pets::plan {

enum class OptimizerKind { kCEM, kRS };

std::string_view to_string(OptimizerKind k);
OptimizerKind optimizer_from_string(std::string_view name);

struct PlannerConfig {
  std::size_t horizon = 25;
  std::size_t population = 500;
  std::size_t iterations = 5;
  std::size_t elites = 50;
  OptimizerKind optimizer = OptimizerKind::kCEM;
  std::size_t rs_samples = 2500;
  std::size_t particles = 20;
  prop::Propagation propagation = prop::Propagation::kTS1;
  bool warm_start = true;
  double min_variance = 1e-6;
  std::size_t threads = 1;

  void validate() const;
  // Objective evaluations per optimization: population * iterations or rs_samples.
  std::size_t budget() const;
  bool operator==(const PlannerConfig&) const = default;
};

// H x d_A sampling distribution plus the action box.
struct ActionPlan {
  nn::Matrix mean;
  nn::Matrix variance;
  std::vector<double> low;
  std::vector<double> high;

  std::size_t horizon() const { return mean.rows(); }
  std::size_t action_dim() const { return mean.cols(); }

  // Mean at the box midpoint, variance (range / 4)^2.
  static ActionPlan initial(std::size_t horizon, std::span<const double> low,
                            std::span<const double> high);
  void validate() const;
};

// Scores n candidates (n x H x d_A row-major). first_index is the global
// index of the first candidate within this optimization, for seed derivation.
using Objective = std::function<void(const double* candidates, std::size_t n,
                                     std::size_t first_index, double* scores,
                                     bool* truncated)>;

struct OptimizeResult {
  nn::Matrix best;                      // H x d_A
  double best_score = 0.0;              // best sampled score (RS) or best elite (CEM)
  std::vector<double> iteration_best;   // best sample score in each iteration
  std::vector<double> best_so_far;      // running maximum of iteration_best
  bool warning = false;                 // every candidate of an iteration truncated
  std::size_t evaluations = 0;
};

// Returns the final elite mean and leaves the refitted distribution in plan.
OptimizeResult cem_optimize(const Objective& objective, ActionPlan& plan,
                            const PlannerConfig& cfg, Rng& rng);

OptimizeResult random_shooting(const Objective& objective, std::span<const double> low,
                               std::span<const double> high, std::size_t horizon,
                               std::size_t n, Rng& rng);

}  // namespace pets::plan
