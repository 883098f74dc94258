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

// Analytic benchmark bodies. Angles are measured from upright and are never
// wrapped; the model featurizes them through (sin, cos).
//
// Rewards are evaluated on the state reached by an action: r(s_{t+1}, a_t).

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pets/common/rng.h"
#include "pets/dynmodel/dataset.h"

namespace pets::envs {

// Batched reward: rows of (next_state, action) -> out[row].
using RewardFunction = std::function<void(const double* states, const double* actions,
                                          std::size_t rows, double* out)>;

struct EnvSpec {
  std::string id;
  dyn::Descriptor descriptor;
  double dt = 0.0;  // seconds
  std::size_t task_horizon = 200;
  std::string reward_id;
};

class Environment {
 public:
  virtual ~Environment() = default;

  virtual const EnvSpec& spec() const = 0;
  virtual std::vector<double> initial_state() const = 0;

  // Deterministic transition; the action is clamped to bounds.
  virtual void step(std::span<const double> state, std::span<const double> action,
                    std::span<double> next) const = 0;

  virtual void reward_batch(const double* states, const double* actions,
                            std::size_t rows, double* out) const = 0;

  virtual std::unique_ptr<Environment> clone() const = 0;

  // Stochastic transition used when collecting real experience. Plain
  // environments ignore the rng.
  virtual void sample_step(std::span<const double> state, std::span<const double> action,
                           std::span<double> next, Rng& rng) const;

  std::vector<double> step(std::span<const double> state,
                           std::span<const double> action) const;
  double reward(std::span<const double> next_state, std::span<const double> action) const;

  // Bound to this instance; the environment must outlive the function.
  RewardFunction reward_function() const;
};

// --- Cartpole ---------------------------------------------------------------
struct CartpoleParams {
  double cart_mass = 1.0;    // kg
  double pole_mass = 0.1;    // kg
  double half_length = 0.5;  // m, pivot to centre of mass
  double gravity = 9.81;     // m/s^2
  double max_force = 10.0;   // N
  double dt = 0.02;          // s
  double reward_length = 0.6;    // m
  double action_cost = 0.01;  // on the action normalized by max_force
};

// State (x, x_dot, theta, theta_dot), theta = 0 upright. Semi-implicit Euler.
std::vector<double> cartpole_step(std::span<const double> state, double force,
                                  const CartpoleParams& p = {});
void cartpole_step_into(const double* state, double force, const CartpoleParams& p,
                        double* next);

// exp(-d^2 / 0.6^2) - 0.01 (a / F_max)^2, d = distance from the pole tip (at
// half_length from the pivot) to its upright position above the origin.
double cartpole_reward(std::span<const double> state, double force,
                       const CartpoleParams& p = {});

// Mechanical energy relative to the cart at rest with the pole upright.
double cartpole_energy(std::span<const double> state, const CartpoleParams& p = {});

class Cartpole final : public Environment {
 public:
  explicit Cartpole(CartpoleParams params = {});
  const EnvSpec& spec() const override { return spec_; }
  std::vector<double> initial_state() const override;
  using Environment::step;
  void step(std::span<const double> state, std::span<const double> action,
            std::span<double> next) const override;
  void reward_batch(const double* states, const double* actions, std::size_t rows,
                    double* out) const override;
  std::unique_ptr<Environment> clone() const override;
  const CartpoleParams& params() const { return params_; }

 private:
  CartpoleParams params_;
  EnvSpec spec_;
};

// --- Pendulum ---------------------------------------------------------------
struct PendulumParams {
  double mass = 1.0;     // kg
  double length = 1.0;   // m
  double gravity = 9.81;
  double max_torque = 2.0;  // N m
  double dt = 0.05;
  double reward_length = 1.0;
  double action_cost = 0.01;  // on the torque normalized by max_torque
};

// State (theta, theta_dot), theta = 0 upright, point mass at `length`.
std::vector<double> pendulum_step(std::span<const double> state, double torque,
                                  const PendulumParams& p = {});
void pendulum_step_into(const double* state, double torque, const PendulumParams& p,
                        double* next);
double pendulum_reward(std::span<const double> state, double torque,
                       const PendulumParams& p = {});
double pendulum_energy(std::span<const double> state, const PendulumParams& p = {});

class Pendulum final : public Environment {
 public:
  explicit Pendulum(PendulumParams params = {});
  const EnvSpec& spec() const override { return spec_; }
  std::vector<double> initial_state() const override;
  using Environment::step;
  void step(std::span<const double> state, std::span<const double> action,
            std::span<double> next) const override;
  void reward_batch(const double* states, const double* actions, std::size_t rows,
                    double* out) const override;
  std::unique_ptr<Environment> clone() const override;

 private:
  PendulumParams params_;
  EnvSpec spec_;
};

// --- Action noise -------------------------------------------------------------
// Adds N(0, (fraction * range)^2) to each action dimension before the inner
// step, then clamps to bounds. fraction must lie in [0, 0.2].
class NoiseWrapper final : public Environment {
 public:
  NoiseWrapper(std::unique_ptr<Environment> inner, double fraction);

  const EnvSpec& spec() const override { return spec_; }
  std::vector<double> initial_state() const override { return inner_->initial_state(); }
  using Environment::step;
  void step(std::span<const double> state, std::span<const double> action,
            std::span<double> next) const override;
  void reward_batch(const double* states, const double* actions, std::size_t rows,
                    double* out) const override;
  std::unique_ptr<Environment> clone() const override;
  void sample_step(std::span<const double> state, std::span<const double> action,
                   std::span<double> next, Rng& rng) const override;

  double fraction() const { return fraction_; }
  const Environment& inner() const { return *inner_; }

  // The action actually applied by sample_step for a given draw.
  std::vector<double> perturb(std::span<const double> action, Rng& rng) const;

 private:
  std::unique_ptr<Environment> inner_;
  double fraction_;
  EnvSpec spec_;
};

std::vector<double> noisy_step(const NoiseWrapper& wrapper, std::span<const double> state,
                               std::span<const double> action, Rng& rng);

// "cartpole", "pendulum", "cartpole-noise:<fraction>", "pendulum-noise:<fraction>".
std::unique_ptr<Environment> make_environment(std::string_view id);
std::vector<std::string> registered_environments();

}  // namespace pets::envs
