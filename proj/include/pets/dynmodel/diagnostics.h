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

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pets/dynmodel/ensemble.h"

namespace pets::dyn {

// Mixture moments of an ensemble at one (state, action): the mean of member
// means, the mean member variance (aleatoric) and the variance of member
// means (epistemic).
struct MixtureMoments {
  std::vector<double> mean;
  std::vector<double> aleatoric_variance;
  std::vector<double> epistemic_variance;
};

MixtureMoments mixture_moments(const EnsembleModel& model, std::span<const double> state,
                               std::span<const double> action);

struct OneStepRow {
  std::size_t dim = 0;
  std::string split;  // "train" or "holdout"
  std::size_t rank = 0;  // position after sorting by ground truth
  double target = 0.0;
  double predicted_mean = 0.0;
  double aleatoric_band = 0.0;  // 2 std
  double epistemic_band = 0.0;  // 2 std
};

struct OneStepReport {
  std::vector<OneStepRow> rows;

  void write_csv(std::ostream& out) const;
  void write_csv(const std::filesystem::path& path) const;
};

inline constexpr double kHoldoutFraction = 0.1;

// The last 10% of records form the holdout split. Within each split and output
// dimension, rows are sorted by ground-truth delta.
OneStepReport diagnostics_one_step(const EnsembleModel& model,
                                   const TransitionDataset& dataset,
                                   double holdout_fraction = kHoldoutFraction);

struct AccuracyResult {
  double mse = 0.0;  // mean over records and dimensions
  double nll = 0.0;  // mean over records of -log mixture density
};

// Deterministic members are scored as unit-variance Gaussians in the NLL.
AccuracyResult diagnostics_accuracy(const EnsembleModel& model,
                                    const TransitionDataset& trajectory);

std::vector<AccuracyResult> diagnostics_accuracy(
    const EnsembleModel& model, const std::vector<TransitionDataset>& trajectories);

// -log N(delta; mean_b, var_b) of one member, full Gaussian constant included.
double member_nll(const EnsembleModel& model, std::size_t member, const Transition& rec);

// -log (1/B) sum_b N(delta; mean_b, var_b).
double mixture_nll(const EnsembleModel& model, const Transition& rec);

}  // namespace pets::dyn
