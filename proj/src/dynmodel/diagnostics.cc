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

#include "pets/dynmodel/diagnostics.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace pets::dyn {
namespace {

double gaussian_log_density(std::span<const double> x, std::span<const double> mean,
                            std::span<const double> var) {
  double lp = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = x[i] - mean[i];
    lp += -0.5 * (std::log(2.0 * std::numbers::pi * var[i]) + r * r / var[i]);
  }
  return lp;
}

GaussianPrediction scored_prediction(const EnsembleModel& model, std::size_t member,
                                     const Transition& rec) {
  GaussianPrediction p = model.predict_member(member, rec.state, rec.action);
  if (!model.probabilistic()) std::fill(p.variance.begin(), p.variance.end(), 1.0);
  return p;
}

}  // namespace

MixtureMoments mixture_moments(const EnsembleModel& model, std::span<const double> state,
                               std::span<const double> action) {
  const std::size_t b_count = model.ensemble_size();
  const std::size_t d = model.descriptor().state_dim;
  std::vector<GaussianPrediction> preds;
  preds.reserve(b_count);
  for (std::size_t b = 0; b < b_count; ++b) {
    preds.push_back(model.predict_member(b, state, action));
  }
  MixtureMoments m;
  m.mean.assign(d, 0.0);
  m.aleatoric_variance.assign(d, 0.0);
  m.epistemic_variance.assign(d, 0.0);
  const double inv_b = 1.0 / static_cast<double>(b_count);
  for (std::size_t i = 0; i < d; ++i) {
    // Shifted sums keep identical members exact.
    const double ref = preds[0].mean[i];
    double shift = 0.0;
    double sq = 0.0;
    double ale = 0.0;
    for (const auto& p : preds) {
      const double dev = p.mean[i] - ref;
      shift += dev;
      sq += dev * dev;
      ale += p.variance[i];
    }
    const double mean_dev = shift * inv_b;
    m.mean[i] = ref + mean_dev;
    m.epistemic_variance[i] = std::max(0.0, sq * inv_b - mean_dev * mean_dev);
    m.aleatoric_variance[i] = ale * inv_b;
  }
  return m;
}

void OneStepReport::write_csv(std::ostream& out) const {
  out << "dim,split,rank,target,predicted_mean,aleatoric_band,epistemic_band\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%zu,%s,%zu,%.17g,%.17g,%.17g,%.17g\n", r.dim,
                  r.split.c_str(), r.rank, r.target, r.predicted_mean, r.aleatoric_band,
                  r.epistemic_band);
    out << buf;
  }
}

void OneStepReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_csv(out);
}

OneStepReport diagnostics_one_step(const EnsembleModel& model,
                                   const TransitionDataset& dataset,
                                   double holdout_fraction) {
  if (dataset.empty()) throw std::invalid_argument("diagnostics_one_step: empty dataset");
  const std::size_t n = dataset.size();
  const std::size_t d = dataset.descriptor().state_dim;
  const auto holdout =
      static_cast<std::size_t>(std::floor(holdout_fraction * static_cast<double>(n)));
  const std::size_t split_at = n - holdout;

  std::vector<MixtureMoments> moments;
  std::vector<std::vector<double>> targets;
  moments.reserve(n);
  targets.reserve(n);
  for (const auto& rec : dataset.records()) {
    moments.push_back(mixture_moments(model, rec.state, rec.action));
    targets.push_back(target_of(rec));
  }

  OneStepReport report;
  report.rows.reserve(n * d);
  for (std::size_t dim = 0; dim < d; ++dim) {
    for (int s = 0; s < 2; ++s) {
      const std::size_t begin = s == 0 ? 0 : split_at;
      const std::size_t end = s == 0 ? split_at : n;
      std::vector<std::size_t> order(end - begin);
      std::iota(order.begin(), order.end(), begin);
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return targets[a][dim] < targets[b][dim];
      });
      for (std::size_t rank = 0; rank < order.size(); ++rank) {
        const std::size_t i = order[rank];
        report.rows.push_back({
            .dim = dim,
            .split = s == 0 ? "train" : "holdout",
            .rank = rank,
            .target = targets[i][dim],
            .predicted_mean = moments[i].mean[dim],
            .aleatoric_band = 2.0 * std::sqrt(moments[i].aleatoric_variance[dim]),
            .epistemic_band = 2.0 * std::sqrt(moments[i].epistemic_variance[dim]),
        });
      }
    }
  }
  return report;
}

double member_nll(const EnsembleModel& model, std::size_t member, const Transition& rec) {
  const GaussianPrediction p = scored_prediction(model, member, rec);
  return -gaussian_log_density(target_of(rec), p.mean, p.variance);
}

double mixture_nll(const EnsembleModel& model, const Transition& rec) {
  const std::size_t b_count = model.ensemble_size();
  const std::vector<double> delta = target_of(rec);
  std::vector<double> log_p(b_count);
  for (std::size_t b = 0; b < b_count; ++b) {
    const GaussianPrediction p = scored_prediction(model, b, rec);
    log_p[b] = gaussian_log_density(delta, p.mean, p.variance);
  }
  const double top = *std::max_element(log_p.begin(), log_p.end());
  double sum = 0.0;
  for (double lp : log_p) sum += std::exp(lp - top);
  return -(top + std::log(sum / static_cast<double>(b_count)));
}

AccuracyResult diagnostics_accuracy(const EnsembleModel& model,
                                    const TransitionDataset& trajectory) {
  if (trajectory.empty()) throw std::invalid_argument("diagnostics_accuracy: empty trajectory");
  const std::size_t d = trajectory.descriptor().state_dim;
  AccuracyResult acc;
  for (const auto& rec : trajectory.records()) {
    const MixtureMoments m = mixture_moments(model, rec.state, rec.action);
    const std::vector<double> delta = target_of(rec);
    for (std::size_t i = 0; i < d; ++i) {
      const double r = m.mean[i] - delta[i];
      acc.mse += r * r;
    }
    acc.nll += mixture_nll(model, rec);
  }
  acc.mse /= static_cast<double>(trajectory.size() * d);
  acc.nll /= static_cast<double>(trajectory.size());
  return acc;
}

std::vector<AccuracyResult> diagnostics_accuracy(
    const EnsembleModel& model, const std::vector<TransitionDataset>& trajectories) {
  if (trajectories.empty()) {
    throw std::invalid_argument("diagnostics_accuracy: no trajectories");
  }
  std::vector<AccuracyResult> out;
  out.reserve(trajectories.size());
  for (const auto& t : trajectories) out.push_back(diagnostics_accuracy(model, t));
  return out;
}

}  // namespace pets::dyn
