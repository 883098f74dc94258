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

#include <cmath>

#include "pets/simd/kernels.h"

namespace pets::simd {
namespace {

void affine_scalar(const double* in, std::size_t rows, std::size_t in_dim,
                   const double* weights, const double* bias,
                   std::size_t out_dim, double* out) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = in + r * in_dim;
    double* y = out + r * out_dim;
    for (std::size_t j = 0; j < out_dim; ++j) y[j] = bias[j];
    for (std::size_t k = 0; k < in_dim; ++k) {
      const double xk = x[k];
      const double* w = weights + k * out_dim;
      for (std::size_t j = 0; j < out_dim; ++j) y[j] = std::fma(xk, w[j], y[j]);
    }
  }
}

void swish_scalar(const double* in, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double x = in[i];
    out[i] = x / (1.0 + std::exp(-x));
  }
}

void exp_scalar(const double* in, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(in[i]);
}

void softplus_scalar(const double* in, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double x = in[i];
    out[i] = std::fmax(x, 0.0) + std::log1p(std::exp(-std::fabs(x)));
  }
}

void sincos_scalar(const double* in, double* s, double* c, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = std::sin(in[i]);
    c[i] = std::cos(in[i]);
  }
}

constexpr KernelTable kScalar{
    .name = "scalar",
    .affine = affine_scalar,
    .swish = swish_scalar,
    .exp = exp_scalar,
    .softplus = softplus_scalar,
    .sincos = sincos_scalar,
};

}  // namespace

const KernelTable& scalar_kernels() { return kScalar; }

}  // namespace pets::simd
