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

// Heteroscedastic sine regression set: x uniform on [-2pi, -pi] U [pi, 2pi],
// y = sin(x) + N(0, 0.0225 |sin(1.5 x + pi/8)|).

#include <cstddef>

#include "pets/common/rng.h"
#include "pets/diffnet/network.h"
#include "pets/dynmodel/dataset.h"

namespace pets::envs {

inline constexpr std::size_t kSineDefaultSize = 2000;

double sine_noise_variance(double x);
double sine_noise_std(double x);

// inputs n x 1 (x), targets n x 1 (y).
nn::Batch sine_dataset(std::size_t n, Rng& rng);

// Transition view with d_S = 1, d_A = 0: state = x, next_state = x + y, so
// the delta target is y.
dyn::TransitionDataset sine_as_transitions(const nn::Batch& batch);

}  // namespace pets::envs
