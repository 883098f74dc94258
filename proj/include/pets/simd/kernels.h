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

// Data-parallel inner loops used by the network and the particle engine.
//
// Every kernel has a portable scalar reference implementation built on <cmath>
// and, on x86-64, AVX2/FMA and AVX-512 variants compiled in their own
// translation units. The widest one the CPU supports is picked at startup;
// PETS_SIMD=scalar|avx2|avx512 in the environment forces a table.

#include <cstddef>
#include <span>
#include <string_view>

namespace pets::simd {

struct KernelTable {
  const char* name;

  // out[r, j] = bias[j] + sum_k in[r, k] * weights[k, j]
  // in: rows x in_dim, weights: in_dim x out_dim (row-major), out: rows x out_dim
  void (*affine)(const double* in, std::size_t rows, std::size_t in_dim,
                 const double* weights, const double* bias,
                 std::size_t out_dim, double* out);

  // x * sigmoid(x), elementwise; in == out allowed.
  void (*swish)(const double* in, double* out, std::size_t n);

  void (*exp)(const double* in, double* out, std::size_t n);

  // log(1 + exp(x)), stable for large |x|.
  void (*softplus)(const double* in, double* out, std::size_t n);

  void (*sincos)(const double* in, double* sin_out, double* cos_out,
                 std::size_t n);
};

const KernelTable& scalar_kernels();

// nullptr when the AVX2 variant was not compiled in or the CPU lacks AVX2/FMA.
const KernelTable* avx2_kernels();

// Same routines on 512-bit vectors; bit-identical to the AVX2 table.
const KernelTable* avx512_kernels();

// The table selected for this process.
const KernelTable& active_kernels();

// Overrides the process-wide selection ("scalar" or "avx2"). Returns false if
// the requested variant is unavailable. Not thread-safe; call before work starts.
bool select_kernels(std::string_view name);

inline void affine(std::span<const double> in, std::size_t rows,
                   std::size_t in_dim, std::span<const double> weights,
                   std::span<const double> bias, std::size_t out_dim,
                   std::span<double> out) {
  active_kernels().affine(in.data(), rows, in_dim, weights.data(), bias.data(),
                          out_dim, out.data());
}

inline void swish(std::span<const double> in, std::span<double> out) {
  active_kernels().swish(in.data(), out.data(), in.size());
}

inline void exp(std::span<const double> in, std::span<double> out) {
  active_kernels().exp(in.data(), out.data(), in.size());
}

inline void softplus(std::span<const double> in, std::span<double> out) {
  active_kernels().softplus(in.data(), out.data(), in.size());
}

inline void sincos(std::span<const double> in, std::span<double> sin_out,
                   std::span<double> cos_out) {
  active_kernels().sincos(in.data(), sin_out.data(), cos_out.data(), in.size());
}

}  // namespace pets::simd
