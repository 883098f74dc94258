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

// What the particle engine needs from a dynamics model: per-member Gaussian
// next-state predictions for a batch of (state, action) rows.

#include <cstddef>
#include <vector>

#include "pets/dynmodel/ensemble.h"
#include "pets/envs/environment.h"

namespace pets::prop {

class DynamicsModel {
 public:
  virtual ~DynamicsModel() = default;

  virtual std::size_t state_dim() const = 0;
  virtual std::size_t action_dim() const = 0;
  virtual std::size_t ensemble_size() const = 0;
  // True when every member predicts zero variance; no noise is drawn.
  virtual bool deterministic() const = 0;

  // states: rows x d_S, actions: rows x d_A. Writes next-state means (state
  // plus predicted delta) and variances, both rows x d_S.
  virtual void predict(std::size_t member, const double* states, const double* actions,
                       std::size_t rows, double* mean_next, double* variance) const = 0;
};

// Trained ensemble. The model must outlive the adapter.
class LearnedDynamics final : public DynamicsModel {
 public:
  explicit LearnedDynamics(const dyn::EnsembleModel& model) : model_(&model) {}

  std::size_t state_dim() const override { return model_->descriptor().state_dim; }
  std::size_t action_dim() const override { return model_->descriptor().action_dim; }
  std::size_t ensemble_size() const override { return model_->ensemble_size(); }
  bool deterministic() const override { return !model_->probabilistic(); }
  void predict(std::size_t member, const double* states, const double* actions,
               std::size_t rows, double* mean_next, double* variance) const override;

 private:
  const dyn::EnsembleModel* model_;
};

// Hand-built ensemble of linear-Gaussian members. Every state dimension i
// follows s'_i = slope * s_i + offset + gain * a_0 + noise_std * eps.
struct LinearMember {
  double slope = 1.0;
  double offset = 0.0;
  double gain = 0.0;
  double noise_std = 0.0;
};

class LinearGaussianEnsemble final : public DynamicsModel {
 public:
  LinearGaussianEnsemble(std::vector<LinearMember> members, std::size_t state_dim = 1,
                         std::size_t action_dim = 1);

  std::size_t state_dim() const override { return state_dim_; }
  std::size_t action_dim() const override { return action_dim_; }
  std::size_t ensemble_size() const override { return members_.size(); }
  bool deterministic() const override;
  void predict(std::size_t member, const double* states, const double* actions,
               std::size_t rows, double* mean_next, double* variance) const override;

  const std::vector<LinearMember>& members() const { return members_; }

 private:
  std::vector<LinearMember> members_;
  std::size_t state_dim_;
  std::size_t action_dim_;
};

// Ground-truth simulator as a deterministic single-member model.
class EnvironmentDynamics final : public DynamicsModel {
 public:
  explicit EnvironmentDynamics(const envs::Environment& env) : env_(&env) {}

  std::size_t state_dim() const override { return env_->spec().descriptor.state_dim; }
  std::size_t action_dim() const override { return env_->spec().descriptor.action_dim; }
  std::size_t ensemble_size() const override { return 1; }
  bool deterministic() const override { return true; }
  void predict(std::size_t member, const double* states, const double* actions,
               std::size_t rows, double* mean_next, double* variance) const override;

 private:
  const envs::Environment* env_;
};

}  // namespace pets::prop
