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
#include <vector>

#include "pets/common/rng.h"

namespace pets::dyn {

// Shapes and bounds of a state/action space.
struct Descriptor {
  std::size_t state_dim = 0;
  std::size_t action_dim = 0;
  // State dimensions fed to the model as (sin, cos) pairs.
  std::vector<std::size_t> angle_dims;
  std::vector<double> action_low;
  std::vector<double> action_high;

  // Width of featurize(): state dims + one extra per angle + action dims.
  std::size_t feature_dim() const { return state_dim + angle_dims.size() + action_dim; }
  bool is_angle(std::size_t dim) const;
  void validate() const;

  bool operator==(const Descriptor&) const = default;
};

struct Transition {
  std::vector<double> state;
  std::vector<double> action;
  std::vector<double> next_state;

  bool operator==(const Transition&) const = default;
};

class TransitionDataset {
 public:
  TransitionDataset() = default;
  explicit TransitionDataset(Descriptor descriptor);

  // Throws std::invalid_argument on dimension mismatch or non-finite entries.
  void add(Transition record);
  void append(const TransitionDataset& other);

  const Descriptor& descriptor() const { return descriptor_; }
  const std::vector<Transition>& records() const { return records_; }
  const Transition& operator[](std::size_t i) const { return records_[i]; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  // Contiguous slice [begin, end).
  TransitionDataset slice(std::size_t begin, std::size_t end) const;

  // Header s_0..s_{dS-1}, a_0..a_{dA-1}, sn_0..sn_{dS-1}; values in %.17g.
  void write_csv(std::ostream& out) const;
  void write_csv(const std::filesystem::path& path) const;
  static TransitionDataset read_csv(std::istream& in, const Descriptor& descriptor);
  static TransitionDataset read_csv(const std::filesystem::path& path,
                                    const Descriptor& descriptor);

 private:
  Descriptor descriptor_;
  std::vector<Transition> records_;
};

// Angle dimensions become (sin, cos) pairs in place; the action is appended.
std::vector<double> featurize(std::span<const double> state,
                              std::span<const double> action,
                              const Descriptor& descriptor);

// Delta target: next_state - state.
std::vector<double> target_of(const Transition& record);

// B index lists, each of size N drawn uniformly with replacement from [0, N).
std::vector<std::vector<std::size_t>> bootstrap_indices(std::size_t n, std::size_t count,
                                                        Rng& rng);

std::vector<TransitionDataset> bootstrap_resample(const TransitionDataset& dataset,
                                                  std::size_t count, Rng& rng);

}  // namespace pets::dyn
