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

#include "pets/plan/optimizer.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>

namespace pets::plan {
namespace {

double sortable(double s) {
  return std::isnan(s) ? -std::numeric_limits<double>::infinity() : s;
}

// Indices of the k best scores; ties go to the lower index.
std::vector<std::size_t> top_k(const std::vector<double>& scores, std::size_t k) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k),
                    order.end(), [&](std::size_t a, std::size_t b) {
                      const double sa = sortable(scores[a]);
                      const double sb = sortable(scores[b]);
                      return sa != sb ? sa > sb : a < b;
                    });
  order.resize(k);
  return order;
}

}  // namespace

std::string_view to_string(OptimizerKind k) {
  return k == OptimizerKind::kCEM ? "CEM" : "RS";
}

OptimizerKind optimizer_from_string(std::string_view name) {
  if (name == "CEM" || name == "cem") return OptimizerKind::kCEM;
  if (name == "RS" || name == "rs" || name == "random") return OptimizerKind::kRS;
  throw std::invalid_argument("unknown optimizer '" + std::string(name) + "'");
}

void PlannerConfig::validate() const {
  if (horizon == 0) throw std::invalid_argument("planner: horizon must be >= 1");
  if (particles == 0) throw std::invalid_argument("planner: particles must be >= 1");
  if (optimizer == OptimizerKind::kCEM) {
    if (population == 0 || iterations == 0 || elites == 0) {
      throw std::invalid_argument("planner: population, iterations and elites must be >= 1");
    }
    if (elites > population) throw std::invalid_argument("planner: elites > population");
  } else if (rs_samples == 0) {
    throw std::invalid_argument("planner: rs_samples must be >= 1");
  }
  if (!(min_variance >= 0.0)) throw std::invalid_argument("planner: min_variance < 0");
}

std::size_t PlannerConfig::budget() const {
  return optimizer == OptimizerKind::kCEM ? population * iterations : rs_samples;
}

ActionPlan ActionPlan::initial(std::size_t horizon, std::span<const double> low,
                               std::span<const double> high) {
  if (horizon == 0 || low.size() != high.size()) {
    throw std::invalid_argument("ActionPlan::initial: bad shape");
  }
  const std::size_t d = low.size();
  ActionPlan plan;
  plan.low.assign(low.begin(), low.end());
  plan.high.assign(high.begin(), high.end());
  plan.mean = nn::Matrix(horizon, d);
  plan.variance = nn::Matrix(horizon, d);
  for (std::size_t h = 0; h < horizon; ++h) {
    for (std::size_t i = 0; i < d; ++i) {
      const double range = high[i] - low[i];
      plan.mean(h, i) = 0.5 * (low[i] + high[i]);
      plan.variance(h, i) = (range / 4.0) * (range / 4.0);
    }
  }
  plan.validate();
  return plan;
}

void ActionPlan::validate() const {
  const std::size_t d = low.size();
  if (high.size() != d || mean.cols() != d || variance.cols() != d ||
      mean.rows() != variance.rows() || mean.rows() == 0) {
    throw std::invalid_argument("ActionPlan: inconsistent shapes");
  }
  for (std::size_t i = 0; i < d; ++i) {
    if (!(low[i] <= high[i])) throw std::invalid_argument("ActionPlan: low > high");
  }
  for (double v : variance.values()) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument("ActionPlan: variance must be finite and >= 0");
    }
  }
}

OptimizeResult cem_optimize(const Objective& objective, ActionPlan& plan,
                            const PlannerConfig& cfg, Rng& rng) {
  cfg.validate();
  plan.validate();
  const std::size_t h = plan.horizon();
  const std::size_t d = plan.action_dim();
  const std::size_t width = h * d;
  const std::size_t n = cfg.population;
  const std::size_t k = cfg.elites;

  std::vector<double> candidates(n * width);
  std::vector<double> scores(n);
  std::unique_ptr<bool[]> truncated(new bool[n]);
  OptimizeResult result;
  double best_so_far = -std::numeric_limits<double>::infinity();

  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    for (std::size_t c = 0; c < n; ++c) {
      double* x = candidates.data() + c * width;
      for (std::size_t j = 0; j < width; ++j) {
        const std::size_t dim = j % d;
        const double m = plan.mean.values()[j];
        const double sd = std::sqrt(plan.variance.values()[j]);
        x[j] = std::clamp(m + sd * standard_normal(rng), plan.low[dim], plan.high[dim]);
      }
    }
    objective(candidates.data(), n, it * n, scores.data(), truncated.get());
    result.evaluations += n;

    if (std::all_of(truncated.get(), truncated.get() + n, [](bool t) { return t; })) {
      result.warning = true;
      break;
    }
    const std::vector<std::size_t> elite = top_k(scores, k);
    const double it_best = scores[elite.front()];
    result.iteration_best.push_back(it_best);
    best_so_far = std::max(best_so_far, it_best);
    result.best_so_far.push_back(best_so_far);
    result.best_score = best_so_far;

    for (std::size_t j = 0; j < width; ++j) {
      // Shifted sums: the refit mean of identical elites is exactly that value.
      const double ref = candidates[elite.front() * width + j];
      double sum = 0.0;
      double sq = 0.0;
      for (std::size_t e : elite) {
        const double dev = candidates[e * width + j] - ref;
        sum += dev;
        sq += dev * dev;
      }
      const double inv = 1.0 / static_cast<double>(k);
      const double mdev = sum * inv;
      const double var = std::max(0.0, sq * inv - mdev * mdev);
      const double old_var = plan.variance.values()[j];
      plan.mean.values()[j] = ref + mdev;
      plan.variance.values()[j] = std::max(var, std::min(cfg.min_variance, old_var));
    }
  }
  result.best = plan.mean;
  return result;
}

OptimizeResult random_shooting(const Objective& objective, std::span<const double> low,
                               std::span<const double> high, std::size_t horizon,
                               std::size_t n, Rng& rng) {
  if (n == 0) throw std::invalid_argument("random_shooting: n must be >= 1");
  if (horizon == 0 || low.size() != high.size() || low.empty()) {
    throw std::invalid_argument("random_shooting: bad shape");
  }
  const std::size_t d = low.size();
  const std::size_t width = horizon * d;
  std::vector<double> candidates(n * width);
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t j = 0; j < width; ++j) {
      const std::size_t dim = j % d;
      candidates[c * width + j] = uniform(rng, low[dim], high[dim]);
    }
  }
  std::vector<double> scores(n);
  std::unique_ptr<bool[]> truncated(new bool[n]);
  objective(candidates.data(), n, 0, scores.data(), truncated.get());

  OptimizeResult result;
  result.evaluations = n;
  const std::size_t best = top_k(scores, 1).front();
  result.best = nn::Matrix::from_data(
      horizon, d,
      std::vector<double>(candidates.begin() + static_cast<std::ptrdiff_t>(best * width),
                          candidates.begin() + static_cast<std::ptrdiff_t>((best + 1) * width)));
  result.best_score = scores[best];
  result.iteration_best = {scores[best]};
  result.best_so_far = {scores[best]};
  result.warning = std::all_of(truncated.get(), truncated.get() + n, [](bool t) { return t; });
  return result;
}

}  // namespace pets::plan
