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

#include "pets/envs/sine.h"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace pets::envs {

double sine_noise_variance(double x) {
  return 0.0225 * std::fabs(std::sin(1.5 * x + std::numbers::pi / 8.0));
}

double sine_noise_std(double x) { return std::sqrt(sine_noise_variance(x)); }

nn::Batch sine_dataset(std::size_t n, Rng& rng) {
  if (n == 0) throw std::invalid_argument("sine_dataset: n must be positive");
  constexpr double pi = std::numbers::pi;
  nn::Batch batch{nn::Matrix(n, 1), nn::Matrix(n, 1)};
  for (std::size_t i = 0; i < n; ++i) {
    const double u = uniform(rng, 0.0, 2.0 * pi);
    const double x = u < pi ? -2.0 * pi + u : u;
    batch.inputs(i, 0) = x;
    batch.targets(i, 0) = std::sin(x) + sine_noise_std(x) * standard_normal(rng);
  }
  return batch;
}

dyn::TransitionDataset sine_as_transitions(const nn::Batch& batch) {
  dyn::Descriptor d;
  d.state_dim = 1;
  d.action_dim = 0;
  dyn::TransitionDataset ds(d);
  for (std::size_t i = 0; i < batch.inputs.rows(); ++i) {
    const double x = batch.inputs(i, 0);
    ds.add({{x}, {}, {x + batch.targets(i, 0)}});
  }
  return ds;
}

}  // namespace pets::envs
