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

// Particle propagation of an action sequence through a dynamics model.
//
// Every rollout is a pure function of (model, s0, actions, seed). A candidate
// owns one Rng seeded from its seed; draws are consumed in a fixed per-step
// order, so evaluating candidates one at a time or in batches (or across
// threads) gives identical results.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pets/common/rng.h"
#include "pets/diffnet/matrix.h"
#include "pets/envs/environment.h"
#include "pets/propagate/models.h"

namespace pets::prop {

enum class Propagation { kTS1, kTSInf, kE, kMM, kDS };

// "TS1", "TSinf", "E", "MM", "DS". Parsing also accepts "TS∞" and "TSInf".
std::string_view to_string(Propagation p);
Propagation propagation_from_string(std::string_view name);

using envs::RewardFunction;

// Score assigned per particle to every step after a rollout is truncated.
inline constexpr double kTruncationReward = -1e6;

struct ParticleBundle {
  nn::Matrix states;                // P x d_S
  // Per particle; empty for E, MM and DS. Under TS1 bundle 0 holds zeros and
  // bundle t > 0 the map that produced it.
  std::vector<std::size_t> bootstrap;
  std::size_t t = 0;
};

struct RolloutResult {
  Propagation scheme = Propagation::kTS1;
  std::vector<ParticleBundle> bundles;  // H + 1 entries, t = 0..H
  nn::Matrix rewards;                   // P x H
  bool truncated = false;
  std::size_t truncated_at = 0;  // first step whose state was non-finite

  std::size_t particles() const { return rewards.rows(); }
  std::size_t horizon() const { return rewards.cols(); }
  // Mean over particles of the summed rewards.
  double expected_return() const;
};

struct UncertaintyDecomposition {
  std::vector<double> aleatoric;  // d_S
  std::vector<double> epistemic;  // d_S
};

// TS1 redraws p -> b uniformly at every step; TS-inf assigns p -> p mod B
// once, which gives each member floor(P/B) or ceil(P/B) particles.
std::vector<std::size_t> assign_bootstraps(std::size_t particles, std::size_t members,
                                           Propagation variant, std::size_t t, Rng& rng);

// actions: H x d_A. P is forced to 1 for E.
RolloutResult rollout(const DynamicsModel& model, std::span<const double> s0,
                      const nn::Matrix& actions, Propagation scheme, std::size_t particles,
                      const RewardFunction& reward, std::uint64_t seed);

// Named entry points; each draws its seed from rng.
RolloutResult rollout_ts(const DynamicsModel& model, std::span<const double> s0,
                         const nn::Matrix& actions, std::size_t particles,
                         Propagation variant, const RewardFunction& reward, Rng& rng);
RolloutResult rollout_e(const DynamicsModel& model, std::span<const double> s0,
                        const nn::Matrix& actions, const RewardFunction& reward);
RolloutResult rollout_mm(const DynamicsModel& model, std::span<const double> s0,
                         const nn::Matrix& actions, std::size_t particles,
                         const RewardFunction& reward, Rng& rng);
RolloutResult rollout_ds(const DynamicsModel& model, std::span<const double> s0,
                         const nn::Matrix& actions, std::size_t particles,
                         const RewardFunction& reward, Rng& rng);

// Per step of a TS-inf rollout: mean over members of the within-group
// population variance, and population variance over members of the group
// means. Needs at least two particles per member.
std::vector<UncertaintyDecomposition> decompose(const RolloutResult& result,
                                                std::size_t members);

struct BatchOptions {
  // A deterministic single-member model keeps every particle identical, so
  // one particle stands in for all P. The scores are bit-identical.
  bool collapse_deterministic = true;
  std::size_t threads = 1;
  // Candidates simulated together per worker pass.
  std::size_t chunk = 128;
};

// Scores n candidates at once. candidates: n x H x d_A row-major; seeds: n.
// scores[i] equals rollout(..., seeds[i]).expected_return().
void evaluate_batch(const DynamicsModel& model, std::span<const double> s0,
                    const double* candidates, std::size_t n, std::size_t horizon,
                    Propagation scheme, std::size_t particles, const RewardFunction& reward,
                    const std::uint64_t* seeds, double* scores, bool* truncated,
                    const BatchOptions& options = {});

// CSV rows (candidate, particle, step, s_0.., reward). Step 0 carries reward 0;
// the reward on step k > 0 is that of the transition into step k.
void write_rollout_csv(const RolloutResult& result, std::size_t candidate,
                       std::ostream& out, bool header = true);
void write_rollout_csv(const RolloutResult& result, const std::filesystem::path& path);

}  // namespace pets::prop
