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

// JSON checkpoints. Doubles are written in shortest round-trip form, so a
// save/load cycle reproduces every parameter bit-for-bit.
//
//   {"format": "pets-mlp", "version": 1, "widths": [...], "head": "probabilistic",
//    "weights": [[row-major...], ...], "biases": [[...], ...],
//    "max_logvar": [...], "min_logvar": [...],
//    "adam": {"step": n, "first_moment": {...}, "second_moment": {...}}}

#include <filesystem>
#include <optional>

#include <json.hpp>

#include "pets/diffnet/network.h"

namespace pets::nn {

struct Checkpoint {
  NetworkParams params;
  std::optional<AdamState> adam;
};

nlohmann::json to_json(const NetworkParams& params,
                       const AdamState* adam = nullptr);
Checkpoint checkpoint_from_json(const nlohmann::json& doc);

void save_checkpoint(const std::filesystem::path& path, const NetworkParams& params,
                     const AdamState* adam = nullptr);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace pets::nn
