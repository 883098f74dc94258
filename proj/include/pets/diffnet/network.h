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

// Fixed-topology multilayer perceptron with exact reverse-mode gradients.
//
// Hidden layers use swish; the output layer is affine. A probabilistic head
// emits 2*d_out values per row: the mean followed by a raw log-variance that is
// squashed between learnable bounds (max_logvar, min_logvar) with two
// softplus compositions. A deterministic head emits the mean only.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "pets/diffnet/matrix.h"

namespace pets::nn {

enum class Head { kProbabilistic, kDeterministic };
enum class LossKind { kGaussianNll, kMse };

inline constexpr double kInitMaxLogvar = 0.5;
inline constexpr double kInitMinLogvar = -10.0;

struct NetworkParams {
  std::vector<std::size_t> widths;
  Head head = Head::kProbabilistic;
  std::vector<Matrix> weights;  // weights[k] is widths[k] x widths[k + 1]
  std::vector<std::vector<double>> biases;
  // One entry per output dimension; empty for deterministic heads.
  std::vector<double> max_logvar;
  std::vector<double> min_logvar;

  std::size_t input_dim() const { return widths.front(); }
  // Dimension of the predicted quantity (half the last width for probabilistic heads).
  std::size_t output_dim() const;
  std::size_t num_layers() const { return weights.size(); }
  std::size_t parameter_count() const;

  // Throws std::invalid_argument when shapes or bounds are inconsistent.
  void validate() const;

  bool operator==(const NetworkParams&) const = default;
};

// Shape-congruent with NetworkParams, including the two bound vectors.
struct Gradient {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;
  std::vector<double> max_logvar;
  std::vector<double> min_logvar;

  static Gradient zeros_like(const NetworkParams& params);
  bool all_finite() const;
  double max_abs() const;

  bool operator==(const Gradient&) const = default;
};

// Visits every parameter tensor as a flat span, in a fixed order:
// weights by layer, biases by layer, max_logvar, min_logvar.
template <typename Tensors, typename Fn>
void visit_tensors(Tensors& t, Fn&& fn) {
  for (auto& w : t.weights) fn(w.values());
  for (auto& b : t.biases) fn(std::span(b));
  fn(std::span(t.max_logvar));
  fn(std::span(t.min_logvar));
}

// Weights ~ N(0, 1/fan_in) truncated at two standard deviations by rejection;
// biases zero; log-variance bounds at (+0.5, -10).
NetworkParams init_params(std::span<const std::size_t> widths, Head head,
                          std::uint64_t seed);

double swish(double x);

double softplus(double x);

// v1 = max - softplus(max - raw); v2 = min + softplus(v1 - min).
// raw is rows x d_out; bounds have d_out entries.
Matrix bound_logvar(const Matrix& raw, std::span<const double> max_logvar,
                    std::span<const double> min_logvar);

struct ForwardOutput {
  Matrix mean;
  std::optional<Matrix> logvar;  // bounded; present for probabilistic heads
};

ForwardOutput forward(const NetworkParams& params, const Matrix& inputs);

// Allocation-free batched inference for the hot path. Buffers grow on demand
// and are reused across calls; one workspace per thread.
class InferenceWorkspace {
 public:
  // inputs: rows x input_dim. mean_out: rows x d_out. logvar_out: rows x d_out
  // or nullptr (ignored for deterministic heads).
  void run(const NetworkParams& params, const double* inputs, std::size_t rows,
           double* mean_out, double* logvar_out);

 private:
  std::vector<double> a_;
  std::vector<double> b_;
  std::vector<double> tmp_;
  std::vector<double> tmp2_;
};

// Sum over rows of (mu - s)^T diag(exp(-logvar)) (mu - s) + sum(logvar), plus
// lambda * sum(max_logvar - min_logvar). No 2*pi constant.
double gaussian_nll(const Matrix& mean, const Matrix& logvar, const Matrix& targets,
                    double lambda = 0.0, std::span<const double> max_logvar = {},
                    std::span<const double> min_logvar = {});

// Sum over rows of the squared Euclidean residual.
double mse_loss(const Matrix& mean, const Matrix& targets);

struct Batch {
  Matrix inputs;
  Matrix targets;
};

struct LossOptions {
  LossKind kind = LossKind::kGaussianNll;
  double lambda = 0.01;
  // Divide the data term (not the bound penalty) by the row count.
  bool mean_over_rows = false;
};

double evaluate_loss(const NetworkParams& params, const Batch& batch,
                     const LossOptions& options);

struct LossAndGradient {
  double loss = 0.0;
  Gradient gradient;
};

// Exact gradient of evaluate_loss with respect to every tensor. Throws
// NumericalError if any intermediate value is non-finite.
LossAndGradient gradient(const NetworkParams& params, const Batch& batch,
                         const LossOptions& options);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::uint64_t step = 0;
  Gradient first_moment;
  Gradient second_moment;

  static AdamState zeros_like(const NetworkParams& params);

  bool operator==(const AdamState&) const = default;
};

// Bias-corrected Adam update applied in place.
void adam_step(NetworkParams& params, const Gradient& grad, AdamState& state,
               const AdamConfig& config = {});

}  // namespace pets::nn
