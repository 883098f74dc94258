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

// Plot-ready learning curves from persisted run logs. Re-exporting the same
// logs rewrites identical bytes.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace pets::harness {

// Running maximum.
std::vector<double> max_so_far(std::span<const double> rewards);

struct SeedCurve {
  std::uint64_t seed = 0;
  std::vector<double> reward;  // raw, indexed by trial
};

struct CurveBand {
  std::size_t trial = 0;
  std::size_t seeds = 0;
  double mean = 0.0;  // of max-so-far
  double low = 0.0;   // min over seeds
  double high = 0.0;  // max over seeds
};

// Reads seed_*/trials.csv under run_dir, ordered by seed.
std::vector<SeedCurve> read_curves(const std::filesystem::path& run_dir);

// Cross-seed band of the max-so-far curves; trial t aggregates the seeds that
// reached it.
std::vector<CurveBand> curve_bands(const std::vector<SeedCurve>& curves);

// Header: trial,seed,reward,reward_maxsofar.
void write_curves_csv(const std::vector<SeedCurve>& curves, std::ostream& out);
void write_bands_csv(const std::vector<CurveBand>& bands, std::ostream& out);
void write_curves_svg(const std::vector<SeedCurve>& curves,
                      const std::vector<CurveBand>& bands, std::ostream& out);

// Writes curves.csv, curves_summary.csv and curves.svg into every run
// directory at or below run_dir (cell_* and horizon_* children included).
// Returns the number of run directories exported.
std::size_t export_curves(const std::filesystem::path& run_dir);

}  // namespace pets::harness
