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

#include "pets/propagate/models.h"

#include <algorithm>
#include <span>
#include <stdexcept>

namespace pets::prop {

void LearnedDynamics::predict(std::size_t member, const double* states,
                              const double* actions, std::size_t rows, double* mean_next,
                              double* variance) const {
  model_->predict_batch(member, states, actions, rows, mean_next, variance);
  const std::size_t n = rows * state_dim();
  for (std::size_t i = 0; i < n; ++i) mean_next[i] += states[i];
}

LinearGaussianEnsemble::LinearGaussianEnsemble(std::vector<LinearMember> members,
                                               std::size_t state_dim,
                                               std::size_t action_dim)
    : members_(std::move(members)), state_dim_(state_dim), action_dim_(action_dim) {
  if (members_.empty()) throw std::invalid_argument("LinearGaussianEnsemble: no members");
  if (state_dim_ == 0) throw std::invalid_argument("LinearGaussianEnsemble: state_dim 0");
  for (const auto& m : members_) {
    if (!(m.noise_std >= 0.0)) {
      throw std::invalid_argument("LinearGaussianEnsemble: negative noise_std");
    }
  }
}

bool LinearGaussianEnsemble::deterministic() const {
  return std::all_of(members_.begin(), members_.end(),
                     [](const LinearMember& m) { return m.noise_std == 0.0; });
}

void LinearGaussianEnsemble::predict(std::size_t member, const double* states,
                                     const double* actions, std::size_t rows,
                                     double* mean_next, double* variance) const {
  if (member >= members_.size()) {
    throw std::invalid_argument("LinearGaussianEnsemble: member out of range");
  }
  const LinearMember& m = members_[member];
  const double var = m.noise_std * m.noise_std;
  for (std::size_t r = 0; r < rows; ++r) {
    const double drive = action_dim_ > 0 ? m.gain * actions[r * action_dim_] : 0.0;
    for (std::size_t i = 0; i < state_dim_; ++i) {
      const std::size_t k = r * state_dim_ + i;
      mean_next[k] = m.slope * states[k] + m.offset + drive;
      variance[k] = var;
    }
  }
}

void EnvironmentDynamics::predict(std::size_t member, const double* states,
                                  const double* actions, std::size_t rows,
                                  double* mean_next, double* variance) const {
  if (member != 0) throw std::invalid_argument("EnvironmentDynamics: single member");
  const std::size_t ds = state_dim();
  const std::size_t da = action_dim();
  for (std::size_t r = 0; r < rows; ++r) {
    env_->step(std::span<const double>(states + r * ds, ds),
               std::span<const double>(actions + r * da, da),
               std::span<double>(mean_next + r * ds, ds));
  }
  std::fill(variance, variance + rows * ds, 0.0);
}

}  // namespace pets::prop
