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

#include "pets/propagate/rollout.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "pets/common/parallel.h"

namespace pets::prop {
namespace {

// x0 + sum(x - x0) / n: exact when all values coincide.
struct ShiftedMoments {
  double ref = 0.0;
  double sum = 0.0;
  double sq = 0.0;
  std::size_t n = 0;

  void add(double x) {
    if (n == 0) ref = x;
    const double d = x - ref;
    sum += d;
    sq += d * d;
    ++n;
  }
  double mean() const { return ref + sum / static_cast<double>(n); }
  // Population variance.
  double variance() const {
    const double inv = 1.0 / static_cast<double>(n);
    const double m = sum * inv;
    return std::max(0.0, sq * inv - m * m);
  }
};

bool all_finite(const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(x[i])) return false;
  }
  return true;
}

// Simulates a block of candidates that share s0. Buffers are reused across
// steps; one instance per worker.
class Engine {
 public:
  Engine(const DynamicsModel& model, Propagation scheme, std::size_t particles,
         const RewardFunction& reward)
      : model_(model),
        scheme_(scheme),
        p_(particles),
        b_(model.ensemble_size()),
        ds_(model.state_dim()),
        da_(model.action_dim()),
        noisy_(!model.deterministic()),
        reward_(reward) {}

  // candidates: n x horizon x d_A. trace (n == 1 only) receives bundles and
  // per-particle rewards.
  void run(std::span<const double> s0, const double* candidates, std::size_t n,
           std::size_t horizon, const std::uint64_t* seeds, double* scores, bool* truncated,
           RolloutResult* trace);

 private:
  void step(std::size_t n);
  void predict_grouped(std::size_t rows);
  void predict_all_members(std::size_t rows);
  double* member_mean(std::size_t b) { return fan_mean_.data() + b * rows_ * ds_; }
  double* member_var(std::size_t b) { return fan_var_.data() + b * rows_ * ds_; }

  const DynamicsModel& model_;
  Propagation scheme_;
  std::size_t p_, b_, ds_, da_;
  bool noisy_;
  const RewardFunction& reward_;
  std::size_t rows_ = 0;

  std::vector<Rng> rngs_;
  std::vector<double> states_, next_, actions_, mean_, var_, rew_, ret_;
  std::vector<double> fan_mean_, fan_var_, samples_;
  std::vector<std::size_t> member_;
  std::vector<std::size_t> group_rows_;
  std::vector<double> gs_, ga_, gm_, gv_;
};

void Engine::run(std::span<const double> s0, const double* candidates, std::size_t n,
                 std::size_t horizon, const std::uint64_t* seeds, double* scores,
                 bool* truncated, RolloutResult* trace) {
  rows_ = n * p_;
  states_.resize(rows_ * ds_);
  next_.resize(rows_ * ds_);
  actions_.resize(rows_ * da_);
  mean_.resize(rows_ * ds_);
  var_.resize(rows_ * ds_);
  rew_.resize(rows_);
  ret_.assign(rows_, 0.0);
  member_.assign(rows_, 0);
  rngs_.resize(n);
  for (std::size_t c = 0; c < n; ++c) rngs_[c].seed(seeds[c]);
  for (std::size_t r = 0; r < rows_; ++r) {
    std::copy(s0.begin(), s0.end(), states_.begin() + r * ds_);
  }
  if (scheme_ == Propagation::kTSInf) {
    for (std::size_t r = 0; r < rows_; ++r) member_[r] = (r % p_) % b_;
  }
  std::vector<char> alive(n, 1);
  std::vector<std::size_t> cut(n, horizon);

  const bool track_members =
      scheme_ == Propagation::kTS1 || scheme_ == Propagation::kTSInf;
  auto record = [&](std::size_t t) {
    ParticleBundle bundle;
    bundle.t = t;
    bundle.states = nn::Matrix::from_data(p_, ds_, std::vector<double>(
                                                       states_.begin(), states_.end()));
    if (track_members) bundle.bootstrap.assign(member_.begin(), member_.end());
    trace->bundles.push_back(std::move(bundle));
  };
  if (trace) {
    trace->scheme = scheme_;
    trace->bundles.clear();
    trace->rewards = nn::Matrix(p_, horizon);
    record(0);
  }

  for (std::size_t t = 0; t < horizon; ++t) {
    for (std::size_t c = 0; c < n; ++c) {
      const double* a = candidates + (c * horizon + t) * da_;
      for (std::size_t p = 0; p < p_; ++p) {
        std::copy(a, a + da_, actions_.begin() + (c * p_ + p) * da_);
      }
    }
    step(n);
    reward_(next_.data(), actions_.data(), rows_, rew_.data());
    for (std::size_t c = 0; c < n; ++c) {
      const std::size_t r0 = c * p_;
      if (alive[c] && (!all_finite(next_.data() + r0 * ds_, p_ * ds_) ||
                       !all_finite(rew_.data() + r0, p_))) {
        alive[c] = 0;
        cut[c] = t;
      }
      if (alive[c]) {
        std::copy(next_.begin() + r0 * ds_, next_.begin() + (r0 + p_) * ds_,
                  states_.begin() + r0 * ds_);
        for (std::size_t p = 0; p < p_; ++p) ret_[r0 + p] += rew_[r0 + p];
      } else {
        for (std::size_t p = 0; p < p_; ++p) ret_[r0 + p] += kTruncationReward;
      }
    }
    if (trace) {
      // Bundle t + 1 carries the member map that produced it.
      record(t + 1);
      for (std::size_t p = 0; p < p_; ++p) {
        trace->rewards(p, t) = alive[0] ? rew_[p] : kTruncationReward;
      }
    }
  }

  for (std::size_t c = 0; c < n; ++c) {
    ShiftedMoments m;
    for (std::size_t p = 0; p < p_; ++p) m.add(ret_[c * p_ + p]);
    scores[c] = m.mean();
    if (truncated) truncated[c] = !alive[c];
  }
  if (trace) {
    trace->truncated = !alive[0];
    trace->truncated_at = cut[0];
  }
}

void Engine::predict_grouped(std::size_t rows) {
  if (b_ == 1) {
    model_.predict(0, states_.data(), actions_.data(), rows, mean_.data(), var_.data());
    return;
  }
  for (std::size_t b = 0; b < b_; ++b) {
    group_rows_.clear();
    for (std::size_t r = 0; r < rows; ++r) {
      if (member_[r] == b) group_rows_.push_back(r);
    }
    const std::size_t g = group_rows_.size();
    if (g == 0) continue;
    gs_.resize(g * ds_);
    ga_.resize(g * da_);
    gm_.resize(g * ds_);
    gv_.resize(g * ds_);
    for (std::size_t k = 0; k < g; ++k) {
      const std::size_t r = group_rows_[k];
      std::copy_n(states_.begin() + r * ds_, ds_, gs_.begin() + k * ds_);
      std::copy_n(actions_.begin() + r * da_, da_, ga_.begin() + k * da_);
    }
    model_.predict(b, gs_.data(), ga_.data(), g, gm_.data(), gv_.data());
    for (std::size_t k = 0; k < g; ++k) {
      const std::size_t r = group_rows_[k];
      std::copy_n(gm_.begin() + k * ds_, ds_, mean_.begin() + r * ds_);
      std::copy_n(gv_.begin() + k * ds_, ds_, var_.begin() + r * ds_);
    }
  }
}

void Engine::predict_all_members(std::size_t rows) {
  fan_mean_.resize(b_ * rows * ds_);
  fan_var_.resize(b_ * rows * ds_);
  for (std::size_t b = 0; b < b_; ++b) {
    model_.predict(b, states_.data(), actions_.data(), rows, member_mean(b), member_var(b));
  }
}

void Engine::step(std::size_t n) {
  switch (scheme_) {
    case Propagation::kTS1:
    case Propagation::kTSInf: {
      if (scheme_ == Propagation::kTS1 && b_ > 1) {
        for (std::size_t c = 0; c < n; ++c) {
          for (std::size_t p = 0; p < p_; ++p) {
            member_[c * p_ + p] = uniform_index(rngs_[c], b_);
          }
        }
      }
      predict_grouped(rows_);
      for (std::size_t c = 0; c < n; ++c) {
        const std::size_t begin = c * p_ * ds_;
        const std::size_t end = begin + p_ * ds_;
        if (noisy_) {
          for (std::size_t k = begin; k < end; ++k) {
            next_[k] = mean_[k] + std::sqrt(var_[k]) * standard_normal(rngs_[c]);
          }
        } else {
          std::copy(mean_.begin() + begin, mean_.begin() + end, next_.begin() + begin);
        }
      }
      break;
    }
    case Propagation::kE: {
      predict_all_members(rows_);
      for (std::size_t k = 0; k < rows_ * ds_; ++k) {
        ShiftedMoments m;
        for (std::size_t b = 0; b < b_; ++b) m.add(member_mean(b)[k]);
        next_[k] = m.mean();
      }
      break;
    }
    case Propagation::kMM:
    case Propagation::kDS: {
      predict_all_members(rows_);
      // Fan-out samples, particle-major then member then dimension.
      samples_.resize(b_ * rows_ * ds_);
      for (std::size_t c = 0; c < n; ++c) {
        for (std::size_t p = 0; p < p_; ++p) {
          const std::size_t r = c * p_ + p;
          for (std::size_t b = 0; b < b_; ++b) {
            const double* mu = member_mean(b) + r * ds_;
            const double* v = member_var(b) + r * ds_;
            double* x = samples_.data() + (r * b_ + b) * ds_;
            for (std::size_t i = 0; i < ds_; ++i) {
              x[i] = noisy_ ? mu[i] + std::sqrt(v[i]) * standard_normal(rngs_[c]) : mu[i];
            }
          }
        }
      }
      if (scheme_ == Propagation::kMM) {
        std::vector<double> pooled_mean(ds_), pooled_std(ds_);
        for (std::size_t c = 0; c < n; ++c) {
          for (std::size_t i = 0; i < ds_; ++i) {
            ShiftedMoments m;
            for (std::size_t q = 0; q < p_ * b_; ++q) {
              m.add(samples_[(c * p_ * b_ + q) * ds_ + i]);
            }
            pooled_mean[i] = m.mean();
            pooled_std[i] = std::sqrt(m.variance());
          }
          for (std::size_t p = 0; p < p_; ++p) {
            for (std::size_t i = 0; i < ds_; ++i) {
              next_[(c * p_ + p) * ds_ + i] =
                  pooled_mean[i] + pooled_std[i] * standard_normal(rngs_[c]);
            }
          }
        }
      } else if (b_ == 1) {
        std::copy_n(samples_.begin(), rows_ * ds_, next_.begin());
      } else {
        for (std::size_t c = 0; c < n; ++c) {
          for (std::size_t p = 0; p < p_; ++p) {
            const std::size_t r = c * p_ + p;
            for (std::size_t i = 0; i < ds_; ++i) {
              ShiftedMoments m;
              for (std::size_t b = 0; b < b_; ++b) m.add(samples_[(r * b_ + b) * ds_ + i]);
              next_[r * ds_ + i] =
                  m.mean() + std::sqrt(m.variance()) * standard_normal(rngs_[c]);
            }
          }
        }
      }
      break;
    }
  }
}

std::size_t effective_particles(const DynamicsModel& model, Propagation scheme,
                                std::size_t particles, bool collapse) {
  if (scheme == Propagation::kE) return 1;
  if (collapse && model.deterministic() && model.ensemble_size() == 1) return 1;
  return particles;
}

void check_inputs(const DynamicsModel& model, std::span<const double> s0,
                  std::size_t particles, std::size_t horizon) {
  if (s0.size() != model.state_dim()) {
    throw std::invalid_argument("rollout: s0 has wrong dimension");
  }
  if (particles == 0) throw std::invalid_argument("rollout: particles must be >= 1");
  if (horizon == 0) throw std::invalid_argument("rollout: horizon must be >= 1");
  if (model.ensemble_size() == 0) throw std::invalid_argument("rollout: empty model");
}

}  // namespace

std::string_view to_string(Propagation p) {
  switch (p) {
    case Propagation::kTS1: return "TS1";
    case Propagation::kTSInf: return "TSinf";
    case Propagation::kE: return "E";
    case Propagation::kMM: return "MM";
    case Propagation::kDS: return "DS";
  }
  return "?";
}

Propagation propagation_from_string(std::string_view name) {
  if (name == "TS1") return Propagation::kTS1;
  if (name == "TSinf" || name == "TSInf" || name == "TS∞") return Propagation::kTSInf;
  if (name == "E") return Propagation::kE;
  if (name == "MM") return Propagation::kMM;
  if (name == "DS") return Propagation::kDS;
  throw std::invalid_argument("unknown propagation scheme '" + std::string(name) + "'");
}

double RolloutResult::expected_return() const {
  ShiftedMoments m;
  for (std::size_t p = 0; p < rewards.rows(); ++p) {
    double sum = 0.0;
    for (std::size_t t = 0; t < rewards.cols(); ++t) sum += rewards(p, t);
    m.add(sum);
  }
  return m.mean();
}

std::vector<std::size_t> assign_bootstraps(std::size_t particles, std::size_t members,
                                           Propagation variant, std::size_t /*t*/,
                                           Rng& rng) {
  if (particles == 0 || members == 0) {
    throw std::invalid_argument("assign_bootstraps: P and B must be >= 1");
  }
  std::vector<std::size_t> out(particles, 0);
  if (members == 1) return out;
  if (variant == Propagation::kTS1) {
    for (auto& b : out) b = uniform_index(rng, members);
  } else if (variant == Propagation::kTSInf) {
    for (std::size_t p = 0; p < particles; ++p) out[p] = p % members;
  } else {
    throw std::invalid_argument("assign_bootstraps: only TS1 and TSinf assign members");
  }
  return out;
}

RolloutResult rollout(const DynamicsModel& model, std::span<const double> s0,
                      const nn::Matrix& actions, Propagation scheme, std::size_t particles,
                      const RewardFunction& reward, std::uint64_t seed) {
  check_inputs(model, s0, particles, actions.rows());
  if (actions.cols() != model.action_dim()) {
    throw std::invalid_argument("rollout: action width mismatch");
  }
  const std::size_t p = effective_particles(model, scheme, particles, false);
  Engine engine(model, scheme, p, reward);
  RolloutResult result;
  double score = 0.0;
  bool truncated = false;
  engine.run(s0, actions.data(), 1, actions.rows(), &seed, &score, &truncated, &result);
  return result;
}

RolloutResult rollout_ts(const DynamicsModel& model, std::span<const double> s0,
                         const nn::Matrix& actions, std::size_t particles,
                         Propagation variant, const RewardFunction& reward, Rng& rng) {
  if (variant != Propagation::kTS1 && variant != Propagation::kTSInf) {
    throw std::invalid_argument("rollout_ts: variant must be TS1 or TSinf");
  }
  return rollout(model, s0, actions, variant, particles, reward, rng());
}

RolloutResult rollout_e(const DynamicsModel& model, std::span<const double> s0,
                        const nn::Matrix& actions, const RewardFunction& reward) {
  return rollout(model, s0, actions, Propagation::kE, 1, reward, 0);
}

RolloutResult rollout_mm(const DynamicsModel& model, std::span<const double> s0,
                         const nn::Matrix& actions, std::size_t particles,
                         const RewardFunction& reward, Rng& rng) {
  return rollout(model, s0, actions, Propagation::kMM, particles, reward, rng());
}

RolloutResult rollout_ds(const DynamicsModel& model, std::span<const double> s0,
                         const nn::Matrix& actions, std::size_t particles,
                         const RewardFunction& reward, Rng& rng) {
  return rollout(model, s0, actions, Propagation::kDS, particles, reward, rng());
}

std::vector<UncertaintyDecomposition> decompose(const RolloutResult& result,
                                                std::size_t members) {
  if (result.scheme != Propagation::kTSInf) {
    throw std::invalid_argument("decompose: needs a TSinf rollout");
  }
  if (members == 0 || result.bundles.empty()) {
    throw std::invalid_argument("decompose: empty input");
  }
  std::vector<UncertaintyDecomposition> out;
  out.reserve(result.bundles.size());
  for (const auto& bundle : result.bundles) {
    const std::size_t p = bundle.states.rows();
    const std::size_t d = bundle.states.cols();
    if (bundle.bootstrap.size() != p) {
      throw std::invalid_argument("decompose: bundle lacks bootstrap indices");
    }
    std::vector<std::size_t> count(members, 0);
    for (std::size_t b : bundle.bootstrap) {
      if (b >= members) throw std::invalid_argument("decompose: bootstrap out of range");
      ++count[b];
    }
    for (std::size_t c : count) {
      if (c < 2) throw std::invalid_argument("decompose: fewer than 2 particles per member");
    }
    UncertaintyDecomposition u;
    u.aleatoric.assign(d, 0.0);
    u.epistemic.assign(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
      std::vector<ShiftedMoments> groups(members);
      for (std::size_t q = 0; q < p; ++q) groups[bundle.bootstrap[q]].add(bundle.states(q, i));
      ShiftedMoments between;
      double within = 0.0;
      for (const auto& g : groups) {
        within += g.variance();
        between.add(g.mean());
      }
      u.aleatoric[i] = within / static_cast<double>(members);
      u.epistemic[i] = between.variance();
    }
    out.push_back(std::move(u));
  }
  return out;
}

void evaluate_batch(const DynamicsModel& model, std::span<const double> s0,
                    const double* candidates, std::size_t n, std::size_t horizon,
                    Propagation scheme, std::size_t particles, const RewardFunction& reward,
                    const std::uint64_t* seeds, double* scores, bool* truncated,
                    const BatchOptions& options) {
  if (n == 0) return;
  check_inputs(model, s0, particles, horizon);
  const std::size_t p =
      effective_particles(model, scheme, particles, options.collapse_deterministic);
  const std::size_t chunk = std::max<std::size_t>(1, options.chunk);
  const std::size_t blocks = (n + chunk - 1) / chunk;
  parallel_chunks(blocks, options.threads, [&](std::size_t begin, std::size_t end) {
    Engine engine(model, scheme, p, reward);
    for (std::size_t k = begin; k < end; ++k) {
      const std::size_t c0 = k * chunk;
      const std::size_t m = std::min(chunk, n - c0);
      engine.run(s0, candidates + c0 * horizon * model.action_dim(), m, horizon, seeds + c0,
                 scores + c0, truncated ? truncated + c0 : nullptr, nullptr);
    }
  });
}

void write_rollout_csv(const RolloutResult& result, std::size_t candidate,
                       std::ostream& out, bool header) {
  if (result.bundles.empty()) return;
  const std::size_t d = result.bundles.front().states.cols();
  if (header) {
    out << "candidate,particle,step";
    for (std::size_t i = 0; i < d; ++i) out << ",s_" << i;
    out << ",reward\n";
  }
  char buf[64];
  for (const auto& bundle : result.bundles) {
    for (std::size_t p = 0; p < bundle.states.rows(); ++p) {
      out << candidate << ',' << p << ',' << bundle.t;
      for (std::size_t i = 0; i < d; ++i) {
        std::snprintf(buf, sizeof(buf), ",%.17g", bundle.states(p, i));
        out << buf;
      }
      const double r = bundle.t == 0 ? 0.0 : result.rewards(p, bundle.t - 1);
      std::snprintf(buf, sizeof(buf), ",%.17g\n", r);
      out << buf;
    }
  }
}

void write_rollout_csv(const RolloutResult& result, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_rollout_csv(result, 0, out, true);
}

}  // namespace pets::prop
