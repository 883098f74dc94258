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

#include <cstdlib>
#include <string_view>

#include "pets/simd/kernels.h"

namespace pets::simd {

#ifdef PETS_HAVE_AVX2
const KernelTable* avx2_kernels_unchecked();
#endif
#ifdef PETS_HAVE_AVX512
const KernelTable* avx512_kernels_unchecked();
#endif

const KernelTable* avx2_kernels() {
#ifdef PETS_HAVE_AVX2
  static const bool supported =
      __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? avx2_kernels_unchecked() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable* avx512_kernels() {
#ifdef PETS_HAVE_AVX512
  static const bool supported =
      __builtin_cpu_supports("avx512f") && __builtin_cpu_supports("avx512dq");
  return supported ? avx512_kernels_unchecked() : nullptr;
#else
  return nullptr;
#endif
}

namespace {

const KernelTable* by_name(std::string_view name) {
  if (name == "scalar") return &scalar_kernels();
  if (name == "avx2") return avx2_kernels();
  if (name == "avx512") return avx512_kernels();
  return nullptr;
}

// Widest supported table unless PETS_SIMD names another one.
const KernelTable* initial_selection() {
  if (const char* forced = std::getenv("PETS_SIMD")) {
    if (const KernelTable* t = by_name(forced)) return t;
  }
  if (const KernelTable* t = avx512_kernels()) return t;
  if (const KernelTable* t = avx2_kernels()) return t;
  return &scalar_kernels();
}

const KernelTable*& selected() {
  static const KernelTable* table = initial_selection();
  return table;
}

}  // namespace

const KernelTable& active_kernels() { return *selected(); }

bool select_kernels(std::string_view name) {
  const KernelTable* t = by_name(name);
  if (t) selected() = t;
  return t != nullptr;
}

}  // namespace pets::simd
