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

// Learned dynamics: the four model classes (D, P, DE, PE), bootstrap
// training, and per-member Gaussian predictions over next-state deltas.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pets/common/rng.h"
#include "pets/diffnet/network.h"
#include "pets/dynmodel/dataset.h"

namespace pets::dyn {

enum class ModelClass { kD, kP, kDE, kPE };

std::string_view to_string(ModelClass c);
ModelClass model_class_from_string(std::string_view name);

inline bool is_probabilistic(ModelClass c) {
  return c == ModelClass::kP || c == ModelClass::kPE;
}
inline bool is_ensemble(ModelClass c) {
  return c == ModelClass::kDE || c == ModelClass::kPE;
}

struct ModelSpec {
  ModelClass model_class = ModelClass::kPE;
  std::size_t ensemble_size = 5;
  std::vector<std::size_t> hidden_widths = {500, 500, 500};
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  double lambda = 0.01;
  double learning_rate = 1e-3;
  // Draw a bootstrap dataset per member. D and P never resample.
  bool resample = true;
  // Worker threads for member training; 0 = hardware concurrency.
  std::size_t threads = 1;

  // B = 1 for D/P, 5 for DE/PE.
  static ModelSpec defaults(ModelClass c);
  void validate() const;
  bool operator==(const ModelSpec&) const = default;
};

// Per-feature affine normalization, std floored at 1e-8.
struct Normalizer {
  std::vector<double> mean;
  std::vector<double> stddev;

  static Normalizer fit(const nn::Matrix& features);
  void normalize(std::span<double> row) const;
  void denormalize(std::span<double> row) const;
  bool operator==(const Normalizer&) const = default;
};

inline constexpr double kStdFloor = 1e-8;

// Diagonal Gaussian over the next-state delta.
struct GaussianPrediction {
  std::vector<double> mean;
  std::vector<double> variance;
};

struct TrainingReport {
  // Final-epoch mean minibatch loss per member.
  std::vector<double> final_loss;
};

class EnsembleModel {
 public:
  EnsembleModel() = default;
  EnsembleModel(std::vector<nn::NetworkParams> members, Normalizer normalizer,
                Descriptor descriptor, ModelSpec spec);

  std::size_t ensemble_size() const { return members_.size(); }
  bool probabilistic() const { return is_probabilistic(spec_.model_class); }
  const std::vector<nn::NetworkParams>& members() const { return members_; }
  const Normalizer& normalizer() const { return normalizer_; }
  const Descriptor& descriptor() const { return descriptor_; }
  const ModelSpec& spec() const { return spec_; }

  GaussianPrediction predict_member(std::size_t member, std::span<const double> state,
                                    std::span<const double> action) const;

  // Batched hot path. states: rows x d_S, actions: rows x d_A; outputs are
  // rows x d_S delta means and variances (zero for deterministic members).
  void predict_batch(std::size_t member, const double* states, const double* actions,
                     std::size_t rows, double* mean_delta, double* variance) const;

  // Featurized and normalized inputs for a batch of rows: rows x feature_dim.
  void normalized_features(const double* states, const double* actions,
                           std::size_t rows, double* out) const;

  bool operator==(const EnsembleModel&) const = default;

 private:
  std::vector<nn::NetworkParams> members_;
  Normalizer normalizer_;
  Descriptor descriptor_;
  ModelSpec spec_;
  std::vector<double> inv_std_;
};

// Normalization comes from the full dataset; each member trains on its own
// bootstrap resample (or on the full dataset for D/P or resample = false) for
// spec.epochs epochs of shuffled minibatch Adam.
EnsembleModel train(const TransitionDataset& dataset, const ModelSpec& spec, Rng& rng,
                    TrainingReport* report = nullptr);

// Draws delta ~ N(mean, diag(var)) from member b and returns state + delta.
std::vector<double> sample_next(const EnsembleModel& model, std::size_t member,
                                std::span<const double> state,
                                std::span<const double> action, Rng& rng);

// Writes manifest.json (spec, normalizer, descriptor) and member_<b>.json
// checkpoints into `dir`.
void save_model(const EnsembleModel& model, const std::filesystem::path& dir);
EnsembleModel load_model(const std::filesystem::path& dir);

}  // namespace pets::dyn
