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

#include "pets/envs/environment.h"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "pets/simd/kernels.h"

namespace pets::envs {
namespace {

double clamp_action(double a, double lo, double hi) { return std::clamp(a, lo, hi); }

}  // namespace

void Environment::sample_step(std::span<const double> state,
                              std::span<const double> action, std::span<double> next,
                              Rng& /*rng*/) const {
  step(state, action, next);
}

std::vector<double> Environment::step(std::span<const double> state,
                                      std::span<const double> action) const {
  std::vector<double> next(spec().descriptor.state_dim);
  step(state, action, next);
  return next;
}

double Environment::reward(std::span<const double> next_state,
                           std::span<const double> action) const {
  double r = 0.0;
  reward_batch(next_state.data(), action.data(), 1, &r);
  return r;
}

RewardFunction Environment::reward_function() const {
  return [this](const double* states, const double* actions, std::size_t rows,
                double* out) { reward_batch(states, actions, rows, out); };
}

// --- Cartpole ---------------------------------------------------------------

void cartpole_step_into(const double* state, double force, const CartpoleParams& p,
                        double* next) {
  const double x = state[0];
  const double x_dot = state[1];
  const double theta = state[2];
  const double theta_dot = state[3];
  const double total = p.cart_mass + p.pole_mass;
  const double s = std::sin(theta);
  const double c = std::cos(theta);
  const double temp = (force + p.pole_mass * p.half_length * theta_dot * theta_dot * s) / total;
  const double theta_acc =
      (p.gravity * s - c * temp) /
      (p.half_length * (4.0 / 3.0 - p.pole_mass * c * c / total));
  const double x_acc = temp - p.pole_mass * p.half_length * theta_acc * c / total;

  const double x_dot_next = x_dot + p.dt * x_acc;
  const double theta_dot_next = theta_dot + p.dt * theta_acc;
  next[0] = x + p.dt * x_dot_next;
  next[1] = x_dot_next;
  next[2] = theta + p.dt * theta_dot_next;
  next[3] = theta_dot_next;
}

std::vector<double> cartpole_step(std::span<const double> state, double force,
                                  const CartpoleParams& p) {
  std::vector<double> next(4);
  cartpole_step_into(state.data(), force, p, next.data());
  return next;
}

double cartpole_reward(std::span<const double> state, double force,
                       const CartpoleParams& p) {
  const double tip_x = state[0] + p.half_length * std::sin(state[2]);
  const double tip_y = p.half_length * std::cos(state[2]);
  const double dy = tip_y - p.half_length;
  const double d2 = tip_x * tip_x + dy * dy;
  const double u = force / p.max_force;
  return std::exp(-d2 / (p.reward_length * p.reward_length)) - p.action_cost * u * u;
}

double cartpole_energy(std::span<const double> state, const CartpoleParams& p) {
  const double x_dot = state[1];
  const double theta = state[2];
  const double theta_dot = state[3];
  const double m = p.pole_mass;
  const double l = p.half_length;
  const double kinetic = 0.5 * (p.cart_mass + m) * x_dot * x_dot +
                         m * l * std::cos(theta) * x_dot * theta_dot +
                         0.5 * (4.0 / 3.0) * m * l * l * theta_dot * theta_dot;
  const double potential = m * p.gravity * l * (std::cos(theta) - 1.0);
  return kinetic + potential;
}

Cartpole::Cartpole(CartpoleParams params) : params_(params) {
  spec_.id = "cartpole";
  spec_.descriptor.state_dim = 4;
  spec_.descriptor.action_dim = 1;
  spec_.descriptor.angle_dims = {2};
  spec_.descriptor.action_low = {-params_.max_force};
  spec_.descriptor.action_high = {params_.max_force};
  spec_.dt = params_.dt;
  spec_.task_horizon = 200;
  spec_.reward_id = "cartpole-tip-distance";
}

std::vector<double> Cartpole::initial_state() const {
  return {0.0, 0.0, std::numbers::pi, 0.0};
}

void Cartpole::step(std::span<const double> state, std::span<const double> action,
                    std::span<double> next) const {
  const double f = clamp_action(action[0], -params_.max_force, params_.max_force);
  cartpole_step_into(state.data(), f, params_, next.data());
}

void Cartpole::reward_batch(const double* states, const double* actions,
                            std::size_t rows, double* out) const {
  // Vectorized over rows: gather theta, one sincos pass, one exp pass.
  thread_local std::vector<double> theta, sin_t, cos_t, arg;
  theta.resize(rows);
  sin_t.resize(rows);
  cos_t.resize(rows);
  arg.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) theta[r] = states[r * 4 + 2];
  simd::sincos(theta, sin_t, cos_t);
  const double l = params_.half_length;
  const double inv_len2 = 1.0 / (params_.reward_length * params_.reward_length);
  for (std::size_t r = 0; r < rows; ++r) {
    const double tip_x = states[r * 4] + l * sin_t[r];
    const double dy = l * cos_t[r] - l;
    arg[r] = -(tip_x * tip_x + dy * dy) * inv_len2;
  }
  simd::exp(arg, std::span<double>(out, rows));
  const double inv_f = 1.0 / params_.max_force;
  for (std::size_t r = 0; r < rows; ++r) {
    const double u = actions[r] * inv_f;
    out[r] -= params_.action_cost * u * u;
  }
}

std::unique_ptr<Environment> Cartpole::clone() const {
  return std::make_unique<Cartpole>(*this);
}

// --- Pendulum ---------------------------------------------------------------

void pendulum_step_into(const double* state, double torque, const PendulumParams& p,
                        double* next) {
  const double theta = state[0];
  const double theta_dot = state[1];
  const double theta_acc = p.gravity / p.length * std::sin(theta) +
                           torque / (p.mass * p.length * p.length);
  const double theta_dot_next = theta_dot + p.dt * theta_acc;
  next[0] = theta + p.dt * theta_dot_next;
  next[1] = theta_dot_next;
}

std::vector<double> pendulum_step(std::span<const double> state, double torque,
                                  const PendulumParams& p) {
  std::vector<double> next(2);
  pendulum_step_into(state.data(), torque, p, next.data());
  return next;
}

double pendulum_reward(std::span<const double> state, double torque,
                       const PendulumParams& p) {
  const double tip_x = p.length * std::sin(state[0]);
  const double dy = p.length * std::cos(state[0]) - p.length;
  const double d2 = tip_x * tip_x + dy * dy;
  const double u = torque / p.max_torque;
  return std::exp(-d2 / (p.reward_length * p.reward_length)) - p.action_cost * u * u;
}

double pendulum_energy(std::span<const double> state, const PendulumParams& p) {
  const double ml2 = p.mass * p.length * p.length;
  return 0.5 * ml2 * state[1] * state[1] +
         p.mass * p.gravity * p.length * (std::cos(state[0]) - 1.0);
}

Pendulum::Pendulum(PendulumParams params) : params_(params) {
  spec_.id = "pendulum";
  spec_.descriptor.state_dim = 2;
  spec_.descriptor.action_dim = 1;
  spec_.descriptor.angle_dims = {0};
  spec_.descriptor.action_low = {-params_.max_torque};
  spec_.descriptor.action_high = {params_.max_torque};
  spec_.dt = params_.dt;
  spec_.task_horizon = 200;
  spec_.reward_id = "pendulum-tip-distance";
}

std::vector<double> Pendulum::initial_state() const { return {std::numbers::pi, 0.0}; }

void Pendulum::step(std::span<const double> state, std::span<const double> action,
                    std::span<double> next) const {
  const double u = clamp_action(action[0], -params_.max_torque, params_.max_torque);
  pendulum_step_into(state.data(), u, params_, next.data());
}

void Pendulum::reward_batch(const double* states, const double* actions,
                            std::size_t rows, double* out) const {
  for (std::size_t r = 0; r < rows; ++r) {
    out[r] = pendulum_reward(std::span<const double>(states + 2 * r, 2), actions[r],
                             params_);
  }
}

std::unique_ptr<Environment> Pendulum::clone() const {
  return std::make_unique<Pendulum>(*this);
}

// --- Action noise -------------------------------------------------------------

NoiseWrapper::NoiseWrapper(std::unique_ptr<Environment> inner, double fraction)
    : inner_(std::move(inner)), fraction_(fraction) {
  if (!inner_) throw std::invalid_argument("NoiseWrapper: null environment");
  if (!(fraction >= 0.0 && fraction <= 0.2)) {
    throw std::invalid_argument("NoiseWrapper: fraction must lie in [0, 0.2]");
  }
  spec_ = inner_->spec();
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s-noise:%g", spec_.id.c_str(), fraction);
  spec_.id = buf;
}

void NoiseWrapper::step(std::span<const double> state, std::span<const double> action,
                        std::span<double> next) const {
  inner_->step(state, action, next);
}

void NoiseWrapper::reward_batch(const double* states, const double* actions,
                                std::size_t rows, double* out) const {
  inner_->reward_batch(states, actions, rows, out);
}

std::unique_ptr<Environment> NoiseWrapper::clone() const {
  return std::make_unique<NoiseWrapper>(inner_->clone(), fraction_);
}

std::vector<double> NoiseWrapper::perturb(std::span<const double> action, Rng& rng) const {
  const auto& d = spec_.descriptor;
  std::vector<double> out(action.begin(), action.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double stddev = fraction_ * (d.action_high[i] - d.action_low[i]);
    if (stddev > 0.0) out[i] += stddev * standard_normal(rng);
    out[i] = std::clamp(out[i], d.action_low[i], d.action_high[i]);
  }
  return out;
}

void NoiseWrapper::sample_step(std::span<const double> state,
                               std::span<const double> action, std::span<double> next,
                               Rng& rng) const {
  const std::vector<double> applied = perturb(action, rng);
  inner_->step(state, applied, next);
}

std::vector<double> noisy_step(const NoiseWrapper& wrapper, std::span<const double> state,
                               std::span<const double> action, Rng& rng) {
  std::vector<double> next(wrapper.spec().descriptor.state_dim);
  wrapper.sample_step(state, action, next, rng);
  return next;
}

std::unique_ptr<Environment> make_environment(std::string_view id) {
  const auto colon = id.find(':');
  std::string_view base = id.substr(0, colon);
  double fraction = -1.0;
  if (colon != std::string_view::npos) {
    const std::string_view suffix = "-noise";
    if (base.size() <= suffix.size() ||
        base.substr(base.size() - suffix.size()) != suffix) {
      throw std::invalid_argument("unknown environment '" + std::string(id) + "'");
    }
    base = base.substr(0, base.size() - suffix.size());
    const std::string_view num = id.substr(colon + 1);
    try {
      std::size_t used = 0;
      fraction = std::stod(std::string(num), &used);
      if (used != num.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw std::invalid_argument("bad noise fraction in '" + std::string(id) + "'");
    }
  }
  std::unique_ptr<Environment> env;
  if (base == "cartpole") {
    env = std::make_unique<Cartpole>();
  } else if (base == "pendulum") {
    env = std::make_unique<Pendulum>();
  } else {
    throw std::invalid_argument("unknown environment '" + std::string(id) + "'");
  }
  if (fraction >= 0.0 || colon != std::string_view::npos) {
    return std::make_unique<NoiseWrapper>(std::move(env), fraction);
  }
  return env;
}

std::vector<std::string> registered_environments() {
  return {"cartpole", "pendulum", "cartpole-noise:<fraction>", "pendulum-noise:<fraction>"};
}

}  // namespace pets::envs
