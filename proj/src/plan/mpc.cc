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

#include "pets/plan/mpc.h"

#include <algorithm>
#include <chrono>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

namespace pets::plan {

double evaluate_candidate(const prop::DynamicsModel& model, std::span<const double> s0,
                          const nn::Matrix& actions, const PlannerConfig& cfg,
                          const prop::RewardFunction& reward, std::uint64_t seed) {
  if (actions.cols() != model.action_dim()) {
    throw std::invalid_argument("evaluate_candidate: action width mismatch");
  }
  double score = 0.0;
  bool truncated = false;
  prop::evaluate_batch(model, s0, actions.data(), 1, actions.rows(), cfg.propagation,
                       cfg.particles, reward, &seed, &score, &truncated);
  return score;
}

Objective make_objective(const prop::DynamicsModel& model, std::span<const double> s0,
                         const PlannerConfig& cfg, const prop::RewardFunction& reward,
                         std::uint64_t base_seed) {
  std::vector<double> start(s0.begin(), s0.end());
  return [&model, start = std::move(start), cfg, &reward, base_seed](
             const double* candidates, std::size_t n, std::size_t first_index,
             double* scores, bool* truncated) {
    std::vector<std::uint64_t> seeds(n);
    for (std::size_t i = 0; i < n; ++i) {
      seeds[i] = derive_seed(base_seed, {static_cast<std::uint64_t>(first_index + i)});
    }
    prop::BatchOptions options;
    options.threads = cfg.threads;
    prop::evaluate_batch(model, start, candidates, n, cfg.horizon, cfg.propagation,
                         cfg.particles, reward, seeds.data(), scores, truncated, options);
  };
}

ActionPlan shift_plan(const nn::Matrix& optimized_mean, std::span<const double> low,
                      std::span<const double> high) {
  const std::size_t h = optimized_mean.rows();
  const std::size_t d = optimized_mean.cols();
  ActionPlan next = ActionPlan::initial(h, low, high);
  for (std::size_t t = 0; t + 1 < h; ++t) {
    for (std::size_t i = 0; i < d; ++i) next.mean(t, i) = optimized_mean(t + 1, i);
  }
  return next;
}

MpcStepResult mpc_step(const prop::DynamicsModel& model, std::span<const double> state,
                       const ActionPlan& plan_prev, const PlannerConfig& cfg,
                       const prop::RewardFunction& reward, Rng& rng) {
  cfg.validate();
  if (plan_prev.horizon() != cfg.horizon || plan_prev.action_dim() != model.action_dim()) {
    throw std::invalid_argument("mpc_step: plan shape does not match config/model");
  }
  for (double s : state) {
    if (!std::isfinite(s)) throw std::invalid_argument("mpc_step: non-finite state");
  }
  const auto t0 = std::chrono::steady_clock::now();
  const std::uint64_t base = rng();
  Rng sampler(derive_seed(base, {0}));
  const Objective objective = make_objective(model, state, cfg, reward, derive_seed(base, {1}));

  MpcStepResult out;
  ActionPlan plan = plan_prev;
  if (cfg.optimizer == OptimizerKind::kCEM) {
    out.optimization = cem_optimize(objective, plan, cfg, sampler);
  } else {
    out.optimization = random_shooting(objective, plan.low, plan.high, cfg.horizon,
                                       cfg.rs_samples, sampler);
  }
  const nn::Matrix& best = out.optimization.best;
  out.action.resize(best.cols());
  for (std::size_t i = 0; i < best.cols(); ++i) {
    out.action[i] = std::clamp(best(0, i), plan.low[i], plan.high[i]);
  }
  out.next_plan = cfg.warm_start ? shift_plan(best, plan.low, plan.high)
                                 : ActionPlan::initial(cfg.horizon, plan.low, plan.high);
  out.elapsed_ms = std::chrono::duration<double, std::milli>(
                       std::chrono::steady_clock::now() - t0)
                       .count();
  return out;
}

void write_trace_line(std::ostream& out, std::size_t step, const MpcStepResult& r) {
  nlohmann::json j;
  j["step"] = step;
  j["iteration_best"] = r.optimization.iteration_best;
  j["best_so_far"] = r.optimization.best_so_far;
  j["evaluations"] = r.optimization.evaluations;
  j["warning"] = r.optimization.warning;
  j["action"] = r.action;
  j["ms"] = r.elapsed_ms;
  out << j.dump() << '\n';
}

}  // namespace pets::plan
