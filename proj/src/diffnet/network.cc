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

#include "pets/diffnet/network.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "pets/common/errors.h"
#include "pets/common/rng.h"
#include "pets/simd/kernels.h"

namespace pets::nn {
namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

void check_finite(double v, const std::string& where) {
  if (!std::isfinite(v)) throw NumericalError("non-finite value in " + where);
}

void check_finite(std::span<const double> v, const std::string& where) {
  for (double x : v) check_finite(x, where);
}

}  // namespace

std::size_t NetworkParams::output_dim() const {
  const std::size_t last = widths.back();
  return head == Head::kProbabilistic ? last / 2 : last;
}

std::size_t NetworkParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& w : weights) n += w.size();
  for (const auto& b : biases) n += b.size();
  return n + max_logvar.size() + min_logvar.size();
}

void NetworkParams::validate() const {
  require(widths.size() >= 2, "NetworkParams: need at least two layer widths");
  for (std::size_t w : widths) require(w > 0, "NetworkParams: zero layer width");
  require(weights.size() == widths.size() - 1 && biases.size() == weights.size(),
          "NetworkParams: layer count mismatch");
  for (std::size_t k = 0; k < weights.size(); ++k) {
    require(weights[k].rows() == widths[k] && weights[k].cols() == widths[k + 1],
            "NetworkParams: weight shape does not chain");
    require(biases[k].size() == widths[k + 1], "NetworkParams: bias shape mismatch");
  }
  if (head == Head::kProbabilistic) {
    require(widths.back() % 2 == 0,
            "NetworkParams: probabilistic head needs an even output width");
    const std::size_t d = widths.back() / 2;
    require(max_logvar.size() == d && min_logvar.size() == d,
            "NetworkParams: log-variance bound size mismatch");
    for (std::size_t i = 0; i < d; ++i) {
      require(max_logvar[i] > min_logvar[i], "NetworkParams: max_logvar <= min_logvar");
    }
  } else {
    require(max_logvar.empty() && min_logvar.empty(),
            "NetworkParams: deterministic head carries no log-variance bounds");
  }
}

Gradient Gradient::zeros_like(const NetworkParams& params) {
  Gradient g;
  for (const auto& w : params.weights) g.weights.emplace_back(w.rows(), w.cols());
  for (const auto& b : params.biases) g.biases.emplace_back(b.size(), 0.0);
  g.max_logvar.assign(params.max_logvar.size(), 0.0);
  g.min_logvar.assign(params.min_logvar.size(), 0.0);
  return g;
}

bool Gradient::all_finite() const {
  bool ok = true;
  visit_tensors(*this, [&](std::span<const double> t) {
    for (double v : t) ok = ok && std::isfinite(v);
  });
  return ok;
}

double Gradient::max_abs() const {
  double m = 0.0;
  visit_tensors(*this, [&](std::span<const double> t) {
    for (double v : t) m = std::max(m, std::fabs(v));
  });
  return m;
}

NetworkParams init_params(std::span<const std::size_t> widths, Head head,
                          std::uint64_t seed) {
  require(widths.size() >= 2, "init_params: need at least two layer widths");
  for (std::size_t w : widths) require(w > 0, "init_params: zero layer width");
  if (head == Head::kProbabilistic) {
    require(widths.back() % 2 == 0,
            "init_params: probabilistic head needs an even output width");
  }

  NetworkParams params;
  params.widths.assign(widths.begin(), widths.end());
  params.head = head;
  Rng rng(seed);
  for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
    const std::size_t fan_in = widths[k];
    const double stddev = std::sqrt(1.0 / static_cast<double>(fan_in));
    Matrix w(fan_in, widths[k + 1]);
    for (double& v : w.values()) {
      double z = standard_normal(rng);
      while (std::fabs(z) > 2.0) z = standard_normal(rng);
      v = z * stddev;
    }
    params.weights.push_back(std::move(w));
    params.biases.emplace_back(widths[k + 1], 0.0);
  }
  if (head == Head::kProbabilistic) {
    const std::size_t d = widths.back() / 2;
    params.max_logvar.assign(d, kInitMaxLogvar);
    params.min_logvar.assign(d, kInitMinLogvar);
  }
  return params;
}

double swish(double x) { return x * sigmoid(x); }

double softplus(double x) {
  return std::fmax(x, 0.0) + std::log1p(std::exp(-std::fabs(x)));
}

Matrix bound_logvar(const Matrix& raw, std::span<const double> max_logvar,
                    std::span<const double> min_logvar) {
  require(max_logvar.size() == raw.cols() && min_logvar.size() == raw.cols(),
          "bound_logvar: bound size does not match columns");
  for (std::size_t j = 0; j < raw.cols(); ++j) {
    require(max_logvar[j] > min_logvar[j], "bound_logvar: max_logvar <= min_logvar");
  }
  Matrix out(raw.rows(), raw.cols());
  for (std::size_t r = 0; r < raw.rows(); ++r) {
    for (std::size_t j = 0; j < raw.cols(); ++j) {
      const double v1 = max_logvar[j] - softplus(max_logvar[j] - raw(r, j));
      out(r, j) = min_logvar[j] + softplus(v1 - min_logvar[j]);
    }
  }
  return out;
}

void InferenceWorkspace::run(const NetworkParams& params, const double* inputs,
                             std::size_t rows, double* mean_out,
                             double* logvar_out) {
  const std::size_t layers = params.weights.size();
  const bool probabilistic = params.head == Head::kProbabilistic;
  const double* cur = inputs;
  for (std::size_t k = 0; k < layers; ++k) {
    const std::size_t in_dim = params.widths[k];
    const std::size_t out_dim = params.widths[k + 1];
    const bool last = k + 1 == layers;
    double* dst;
    if (last && !probabilistic) {
      dst = mean_out;
    } else {
      std::vector<double>& buf = (k % 2 == 0) ? a_ : b_;
      if (buf.size() < rows * out_dim) buf.resize(rows * out_dim);
      dst = buf.data();
    }
    simd::active_kernels().affine(cur, rows, in_dim, params.weights[k].data(),
                                  params.biases[k].data(), out_dim, dst);
    if (!last) simd::active_kernels().swish(dst, dst, rows * out_dim);
    cur = dst;
  }
  if (!probabilistic) return;

  const std::size_t d = params.widths.back() / 2;
  const std::size_t n = rows * d;
  if (tmp_.size() < n) {
    tmp_.resize(n);
    tmp2_.resize(n);
  }
  for (std::size_t r = 0; r < rows; ++r) {
    const double* src = cur + r * 2 * d;
    std::copy(src, src + d, mean_out + r * d);
    for (std::size_t j = 0; j < d; ++j) tmp_[r * d + j] = params.max_logvar[j] - src[d + j];
  }
  if (logvar_out == nullptr) return;
  const auto& kernels = simd::active_kernels();
  kernels.softplus(tmp_.data(), tmp2_.data(), n);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < d; ++j) {
      const std::size_t i = r * d + j;
      // v1 - min
      tmp_[i] = (params.max_logvar[j] - tmp2_[i]) - params.min_logvar[j];
    }
  }
  kernels.softplus(tmp_.data(), tmp2_.data(), n);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < d; ++j) {
      logvar_out[r * d + j] = params.min_logvar[j] + tmp2_[r * d + j];
    }
  }
}

ForwardOutput forward(const NetworkParams& params, const Matrix& inputs) {
  require(inputs.cols() == params.input_dim(), "forward: input width mismatch");
  const std::size_t d = params.output_dim();
  ForwardOutput out;
  out.mean = Matrix(inputs.rows(), d);
  InferenceWorkspace ws;
  if (params.head == Head::kProbabilistic) {
    out.logvar = Matrix(inputs.rows(), d);
    ws.run(params, inputs.data(), inputs.rows(), out.mean.data(), out.logvar->data());
  } else {
    ws.run(params, inputs.data(), inputs.rows(), out.mean.data(), nullptr);
  }
  return out;
}

double gaussian_nll(const Matrix& mean, const Matrix& logvar, const Matrix& targets,
                    double lambda, std::span<const double> max_logvar,
                    std::span<const double> min_logvar) {
  require(mean.rows() == targets.rows() && mean.cols() == targets.cols() &&
              logvar.rows() == mean.rows() && logvar.cols() == mean.cols(),
          "gaussian_nll: shape mismatch");
  require(max_logvar.size() == min_logvar.size(), "gaussian_nll: bound size mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double res = mean.values()[i] - targets.values()[i];
    const double lv = logvar.values()[i];
    total += res * res * std::exp(-lv) + lv;
  }
  for (std::size_t j = 0; j < max_logvar.size(); ++j) {
    total += lambda * (max_logvar[j] - min_logvar[j]);
  }
  check_finite(total, "gaussian_nll");
  return total;
}

double mse_loss(const Matrix& mean, const Matrix& targets) {
  require(mean.rows() == targets.rows() && mean.cols() == targets.cols(),
          "mse_loss: shape mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double res = mean.values()[i] - targets.values()[i];
    total += res * res;
  }
  return total;
}

namespace {

void check_batch(const NetworkParams& params, const Batch& batch,
                 const LossOptions& options) {
  require(batch.inputs.rows() > 0, "gradient: empty batch");
  require(batch.inputs.rows() == batch.targets.rows(), "gradient: row count mismatch");
  require(batch.inputs.cols() == params.input_dim(), "gradient: input width mismatch");
  require(batch.targets.cols() == params.output_dim(), "gradient: target width mismatch");
  require(!(options.kind == LossKind::kGaussianNll && params.head == Head::kDeterministic),
          "gradient: Gaussian NLL needs a probabilistic head");
}

// Forward pass that keeps every pre-activation for the backward sweep.
struct Trace {
  std::vector<Matrix> pre;   // pre[k]: rows x widths[k + 1]
  std::vector<Matrix> post;  // post[k] = swish(pre[k]) for hidden layers
};

Trace trace_forward(const NetworkParams& params, const Matrix& inputs) {
  const std::size_t layers = params.weights.size();
  const std::size_t rows = inputs.rows();
  Trace t;
  t.pre.reserve(layers);
  t.post.reserve(layers);
  const Matrix* cur = &inputs;
  for (std::size_t k = 0; k < layers; ++k) {
    Matrix z(rows, params.widths[k + 1]);
    simd::affine(cur->values(), rows, params.widths[k], params.weights[k].values(),
                 params.biases[k], params.widths[k + 1], z.values());
    t.pre.push_back(std::move(z));
    if (k + 1 < layers) {
      Matrix a(rows, params.widths[k + 1]);
      simd::swish(t.pre.back().values(), a.values());
      t.post.push_back(std::move(a));
      cur = &t.post.back();
    }
  }
  return t;
}

}  // namespace

double evaluate_loss(const NetworkParams& params, const Batch& batch,
                     const LossOptions& options) {
  check_batch(params, batch, options);
  const ForwardOutput out = forward(params, batch.inputs);
  const double scale =
      options.mean_over_rows ? 1.0 / static_cast<double>(batch.inputs.rows()) : 1.0;
  if (options.kind == LossKind::kMse) return scale * mse_loss(out.mean, batch.targets);
  double penalty = 0.0;
  for (std::size_t j = 0; j < params.max_logvar.size(); ++j) {
    penalty += options.lambda * (params.max_logvar[j] - params.min_logvar[j]);
  }
  return scale * gaussian_nll(out.mean, *out.logvar, batch.targets) + penalty;
}

LossAndGradient gradient(const NetworkParams& params, const Batch& batch,
                         const LossOptions& options) {
  check_batch(params, batch, options);
  const std::size_t layers = params.weights.size();
  const std::size_t rows = batch.inputs.rows();
  const std::size_t d = params.output_dim();
  const bool probabilistic = params.head == Head::kProbabilistic;
  const double scale = options.mean_over_rows ? 1.0 / static_cast<double>(rows) : 1.0;

  const Trace trace = trace_forward(params, batch.inputs);
  const Matrix& out = trace.pre.back();
  check_finite(out.values(), "network output");

  LossAndGradient result;
  result.gradient = Gradient::zeros_like(params);
  Gradient& g = result.gradient;

  Matrix dz(rows, params.widths.back());
  double data_term = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < d; ++j) {
      const double res = out(r, j) - batch.targets(r, j);
      if (options.kind == LossKind::kMse) {
        data_term += res * res;
        dz(r, j) = 2.0 * res * scale;
        continue;
      }
      const double hi = params.max_logvar[j];
      const double lo = params.min_logvar[j];
      const double raw = out(r, d + j);
      const double v1 = hi - softplus(hi - raw);
      const double v2 = lo + softplus(v1 - lo);
      const double s1 = sigmoid(hi - raw);
      const double s2 = sigmoid(v1 - lo);
      const double inv_var = std::exp(-v2);
      data_term += res * res * inv_var + v2;
      dz(r, j) = 2.0 * res * inv_var * scale;
      const double dv2 = (1.0 - res * res * inv_var) * scale;
      dz(r, d + j) = dv2 * s2 * s1;
      g.max_logvar[j] += dv2 * s2 * (1.0 - s1);
      g.min_logvar[j] += dv2 * (1.0 - s2);
    }
  }
  result.loss = scale * data_term;
  if (probabilistic && options.kind == LossKind::kGaussianNll) {
    for (std::size_t j = 0; j < d; ++j) {
      result.loss += options.lambda * (params.max_logvar[j] - params.min_logvar[j]);
      g.max_logvar[j] += options.lambda;
      g.min_logvar[j] -= options.lambda;
    }
  }
  check_finite(result.loss, "loss");

  for (std::size_t k = layers; k-- > 0;) {
    const Matrix& prev = k == 0 ? batch.inputs : trace.post[k - 1];
    const std::size_t in_dim = params.widths[k];
    const std::size_t out_dim = params.widths[k + 1];
    Matrix& dw = g.weights[k];
    std::vector<double>& db = g.biases[k];
    for (std::size_t r = 0; r < rows; ++r) {
      const double* dzr = dz.data() + r * out_dim;
      const double* pr = prev.data() + r * in_dim;
      for (std::size_t j = 0; j < out_dim; ++j) db[j] += dzr[j];
      for (std::size_t i = 0; i < in_dim; ++i) {
        const double p = pr[i];
        double* dwi = dw.data() + i * out_dim;
        for (std::size_t j = 0; j < out_dim; ++j) dwi[j] += p * dzr[j];
      }
    }
    if (k == 0) break;
    Matrix dprev(rows, in_dim);
    const Matrix& w = params.weights[k];
    const Matrix& z = trace.pre[k - 1];
    for (std::size_t r = 0; r < rows; ++r) {
      const double* dzr = dz.data() + r * out_dim;
      for (std::size_t i = 0; i < in_dim; ++i) {
        const double* wi = w.data() + i * out_dim;
        double acc = 0.0;
        for (std::size_t j = 0; j < out_dim; ++j) acc += wi[j] * dzr[j];
        const double zi = z(r, i);
        const double s = sigmoid(zi);
        dprev(r, i) = acc * (s + zi * s * (1.0 - s));
      }
    }
    dz = std::move(dprev);
  }

  if (!g.all_finite()) throw NumericalError("non-finite value in gradient");
  return result;
}

AdamState AdamState::zeros_like(const NetworkParams& params) {
  AdamState s;
  s.first_moment = Gradient::zeros_like(params);
  s.second_moment = Gradient::zeros_like(params);
  return s;
}

void adam_step(NetworkParams& params, const Gradient& grad, AdamState& state,
               const AdamConfig& config) {
  const Gradient shape = Gradient::zeros_like(params);
  auto same_shape = [](const Gradient& a, const Gradient& b) {
    if (a.weights.size() != b.weights.size() || a.biases.size() != b.biases.size() ||
        a.max_logvar.size() != b.max_logvar.size() ||
        a.min_logvar.size() != b.min_logvar.size()) {
      return false;
    }
    for (std::size_t k = 0; k < a.weights.size(); ++k) {
      if (a.weights[k].rows() != b.weights[k].rows() ||
          a.weights[k].cols() != b.weights[k].cols() ||
          a.biases[k].size() != b.biases[k].size()) {
        return false;
      }
    }
    return true;
  };
  require(same_shape(grad, shape), "adam_step: gradient shape mismatch");
  if (state.step == 0 && state.first_moment.weights.empty()) {
    state = AdamState::zeros_like(params);
  }
  require(same_shape(state.first_moment, shape) && same_shape(state.second_moment, shape),
          "adam_step: optimizer state shape mismatch");

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);

  std::vector<std::span<double>> p_tensors;
  std::vector<std::span<const double>> g_tensors;
  std::vector<std::span<double>> m_tensors;
  std::vector<std::span<double>> v_tensors;
  visit_tensors(params, [&](std::span<double> s) { p_tensors.push_back(s); });
  visit_tensors(grad, [&](std::span<const double> s) { g_tensors.push_back(s); });
  visit_tensors(state.first_moment, [&](std::span<double> s) { m_tensors.push_back(s); });
  visit_tensors(state.second_moment, [&](std::span<double> s) { v_tensors.push_back(s); });

  for (std::size_t k = 0; k < p_tensors.size(); ++k) {
    auto p = p_tensors[k];
    auto gk = g_tensors[k];
    auto m = m_tensors[k];
    auto v = v_tensors[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * gk[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * gk[i] * gk[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
  }
}

}  // namespace pets::nn
