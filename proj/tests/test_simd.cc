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

// Scalar reference kernels against <cmath>, and the AVX2 variants against the
// scalar ones.

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "pets/simd/kernels.h"

namespace pets::simd {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<double> random_values(std::size_t n, double lo, double hi, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

// Relative agreement with an absolute floor for values near zero.
void expect_close(double a, double b, double rel, double abs_floor = 1e-300) {
  if (std::isnan(a) || std::isnan(b)) {
    EXPECT_EQ(std::isnan(a), std::isnan(b)) << a << " vs " << b;
    return;
  }
  if (std::isinf(a) || std::isinf(b)) {
    EXPECT_EQ(a, b);
    return;
  }
  EXPECT_LE(std::abs(a - b), rel * std::max({std::abs(a), std::abs(b), abs_floor}))
      << a << " vs " << b;
}

std::vector<double> edge_values() {
  return {0.0,   -0.0,  1e-300, -1e-300, 1e-10, -1e-10, 0.5,   -0.5,  1.0,  -1.0,
          20.0,  -20.0, 36.0,   -36.0,   40.0,  -40.0,  700.0, -700.0, 708.0, -708.0,
          709.5, -745.0, 800.0, -800.0,  kInf,  -kInf};
}

TEST(ScalarKernels, ExpMatchesLibm) {
  const auto& k = scalar_kernels();
  auto x = random_values(1000, -700, 700, 1);
  std::vector<double> y(x.size());
  k.exp(x.data(), y.data(), x.size());
  for (std::size_t i = 0; i < x.size(); ++i) expect_close(y[i], std::exp(x[i]), 1e-15);
}

TEST(ScalarKernels, SwishExamples) {
  const auto& k = scalar_kernels();
  std::vector<double> x = {0.0, 1.0, -20.0};
  std::vector<double> y(3);
  k.swish(x.data(), y.data(), 3);
  EXPECT_EQ(y[0], 0.0);
  EXPECT_NEAR(y[1], 0.731059, 1e-5);
  EXPECT_NEAR(y[2], -20.0 / (1.0 + std::exp(20.0)), 1e-20);
  EXPECT_NEAR(y[2], -4.1e-8, 0.05e-8);
}

TEST(ScalarKernels, SoftplusIsStable) {
  const auto& k = scalar_kernels();
  std::vector<double> x = {-800.0, -40.0, 0.0, 40.0, 800.0};
  std::vector<double> y(x.size());
  k.softplus(x.data(), y.data(), x.size());
  EXPECT_EQ(y[0], 0.0);
  expect_close(y[1], std::exp(-40.0), 1e-14);
  expect_close(y[2], std::log(2.0), 1e-15);
  expect_close(y[3], 40.0, 1e-15);
  EXPECT_EQ(y[4], 800.0);
}

TEST(ScalarKernels, AffineMatchesNaiveLoops) {
  const std::size_t rows = 7, in = 5, out = 3;
  auto x = random_values(rows * in, -1, 1, 2);
  auto w = random_values(in * out, -1, 1, 3);
  auto b = random_values(out, -1, 1, 4);
  std::vector<double> y(rows * out);
  scalar_kernels().affine(x.data(), rows, in, w.data(), b.data(), out, y.data());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < out; ++j) {
      long double acc = b[j];
      for (std::size_t k = 0; k < in; ++k) acc += (long double)x[r * in + k] * w[k * out + j];
      expect_close(y[r * out + j], static_cast<double>(acc), 1e-13, 1e-12);
    }
  }
}

// The vector exp flushes to zero below -708, where libm goes subnormal.
void expect_exp(double vec, double ref, double x) {
  if (x < -708.0) {
    EXPECT_EQ(vec, 0.0) << x;
  } else {
    expect_close(vec, ref, 4e-16);
  }
}

class Avx2Equivalence : public ::testing::Test {
 protected:
  void SetUp() override {
    avx2_ = avx2_kernels();
    if (!avx2_) GTEST_SKIP() << "AVX2 variant unavailable on this machine";
  }
  const KernelTable* avx2_ = nullptr;
};

// Lengths cover the 4-wide blocks, the 16-wide unrolled blocks and tails.
const std::vector<std::size_t> kLengths = {1, 3, 4, 5, 15, 16, 17, 33, 1000};

TEST_F(Avx2Equivalence, Exp) {
  for (std::size_t n : kLengths) {
    auto x = random_values(n, -745, 709, static_cast<unsigned>(n));
    std::vector<double> a(n), b(n);
    scalar_kernels().exp(x.data(), a.data(), n);
    avx2_->exp(x.data(), b.data(), n);
    for (std::size_t i = 0; i < n; ++i) expect_exp(b[i], a[i], x[i]);
  }
  auto e = edge_values();
  std::vector<double> a(e.size()), b(e.size());
  scalar_kernels().exp(e.data(), a.data(), e.size());
  avx2_->exp(e.data(), b.data(), e.size());
  for (std::size_t i = 0; i < e.size(); ++i) expect_exp(b[i], a[i], e[i]);
}

TEST_F(Avx2Equivalence, Swish) {
  for (std::size_t n : kLengths) {
    auto x = random_values(n, -50, 50, 100 + static_cast<unsigned>(n));
    std::vector<double> a(n), b(n);
    scalar_kernels().swish(x.data(), a.data(), n);
    avx2_->swish(x.data(), b.data(), n);
    for (std::size_t i = 0; i < n; ++i) expect_close(b[i], a[i], 1e-15);
  }
  auto e = edge_values();
  std::vector<double> a(e.size()), b(e.size());
  scalar_kernels().swish(e.data(), a.data(), e.size());
  avx2_->swish(e.data(), b.data(), e.size());
  for (std::size_t i = 0; i < e.size(); ++i) expect_close(b[i], a[i], 1e-15);
}

TEST_F(Avx2Equivalence, SwishInPlace) {
  auto x = random_values(37, -5, 5, 7);
  auto y = x;
  std::vector<double> ref(x.size());
  scalar_kernels().swish(x.data(), ref.data(), x.size());
  avx2_->swish(y.data(), y.data(), y.size());
  for (std::size_t i = 0; i < x.size(); ++i) expect_close(y[i], ref[i], 1e-15);
}

TEST_F(Avx2Equivalence, Softplus) {
  for (std::size_t n : kLengths) {
    auto x = random_values(n, -60, 60, 200 + static_cast<unsigned>(n));
    std::vector<double> a(n), b(n);
    scalar_kernels().softplus(x.data(), a.data(), n);
    avx2_->softplus(x.data(), b.data(), n);
    for (std::size_t i = 0; i < n; ++i) expect_close(b[i], a[i], 1e-15);
  }
  auto e = edge_values();
  std::vector<double> a(e.size()), b(e.size());
  scalar_kernels().softplus(e.data(), a.data(), e.size());
  avx2_->softplus(e.data(), b.data(), e.size());
  for (std::size_t i = 0; i < e.size(); ++i) expect_close(b[i], a[i], 1e-15);
}

TEST_F(Avx2Equivalence, Sincos) {
  for (std::size_t n : kLengths) {
    auto x = random_values(n, -100, 100, 300 + static_cast<unsigned>(n));
    std::vector<double> s1(n), c1(n), s2(n), c2(n);
    scalar_kernels().sincos(x.data(), s1.data(), c1.data(), n);
    avx2_->sincos(x.data(), s2.data(), c2.data(), n);
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_NEAR(s2[i], s1[i], 4e-16);
      EXPECT_NEAR(c2[i], c1[i], 4e-16);
    }
  }
}

TEST_F(Avx2Equivalence, Affine) {
  for (std::size_t rows : {1u, 3u, 8u, 65u}) {
    for (std::size_t in : {1u, 5u, 16u}) {
      for (std::size_t out : {1u, 3u, 4u, 8u, 13u, 32u}) {
        const unsigned seed = static_cast<unsigned>(rows * 10000 + in * 100 + out);
        auto x = random_values(rows * in, -2, 2, seed);
        auto w = random_values(in * out, -1, 1, seed + 1);
        auto b = random_values(out, -1, 1, seed + 2);
        std::vector<double> a(rows * out), c(rows * out);
        scalar_kernels().affine(x.data(), rows, in, w.data(), b.data(), out, a.data());
        avx2_->affine(x.data(), rows, in, w.data(), b.data(), out, c.data());
        for (std::size_t i = 0; i < a.size(); ++i) expect_close(c[i], a[i], 1e-13, 1e-12);
      }
    }
  }
}

// The 512-bit table repeats the AVX2 arithmetic lane for lane.
class Avx512Equivalence : public ::testing::Test {
 protected:
  void SetUp() override {
    wide_ = avx512_kernels();
    narrow_ = avx2_kernels();
    if (!wide_ || !narrow_) GTEST_SKIP() << "AVX-512 variant unavailable on this machine";
  }
  template <typename F>
  void same_bits(F kernel, double lo, double hi) {
    for (std::size_t n : kLengths) {
      auto x = random_values(n, lo, hi, 500 + static_cast<unsigned>(n));
      std::vector<double> a(n), b(n);
      kernel(*narrow_, x, a);
      kernel(*wide_, x, b);
      for (std::size_t i = 0; i < n; ++i) {
        EXPECT_EQ(std::bit_cast<std::uint64_t>(a[i]), std::bit_cast<std::uint64_t>(b[i]))
            << x[i];
      }
    }
    auto e = edge_values();
    std::vector<double> a(e.size()), b(e.size());
    kernel(*narrow_, e, a);
    kernel(*wide_, e, b);
    for (std::size_t i = 0; i < e.size(); ++i) {
      EXPECT_EQ(std::bit_cast<std::uint64_t>(a[i]), std::bit_cast<std::uint64_t>(b[i]))
          << e[i];
    }
  }
  const KernelTable* wide_ = nullptr;
  const KernelTable* narrow_ = nullptr;
};

TEST_F(Avx512Equivalence, Exp) {
  same_bits([](const KernelTable& k, const std::vector<double>& x,
               std::vector<double>& y) { k.exp(x.data(), y.data(), x.size()); },
            -745, 709);
}

TEST_F(Avx512Equivalence, Swish) {
  same_bits([](const KernelTable& k, const std::vector<double>& x,
               std::vector<double>& y) { k.swish(x.data(), y.data(), x.size()); },
            -50, 50);
}

TEST_F(Avx512Equivalence, Softplus) {
  same_bits([](const KernelTable& k, const std::vector<double>& x,
               std::vector<double>& y) { k.softplus(x.data(), y.data(), x.size()); },
            -60, 60);
}

TEST_F(Avx512Equivalence, Sincos) {
  same_bits([](const KernelTable& k, const std::vector<double>& x,
               std::vector<double>& y) {
              std::vector<double> c(x.size());
              k.sincos(x.data(), y.data(), c.data(), x.size());
              for (std::size_t i = 0; i < x.size(); ++i) y[i] += 4.0 * c[i];
            },
            -100, 100);
}

TEST_F(Avx512Equivalence, AffineMatchesEveryTable) {
  // Bias first, then one FMA per input in order: all three tables agree exactly.
  for (std::size_t in : {1u, 3u, 7u, 32u}) {
    for (std::size_t out : {1u, 5u, 8u, 13u, 32u, 40u}) {
      for (std::size_t rows : {1u, 2u, 5u}) {
        auto x = random_values(rows * in, -2, 2, static_cast<unsigned>(in * 100 + out));
        auto w = random_values(in * out, -1, 1, static_cast<unsigned>(out * 7 + rows));
        auto b = random_values(out, -1, 1, static_cast<unsigned>(rows + 3));
        std::vector<double> s(rows * out), n(rows * out), v(rows * out);
        scalar_kernels().affine(x.data(), rows, in, w.data(), b.data(), out, s.data());
        narrow_->affine(x.data(), rows, in, w.data(), b.data(), out, n.data());
        wide_->affine(x.data(), rows, in, w.data(), b.data(), out, v.data());
        EXPECT_EQ(s, v);
        EXPECT_EQ(n, v);
      }
    }
  }
}

TEST_F(Avx512Equivalence, SwishInPlace) {
  auto x = random_values(37, -5, 5, 9);
  auto y = x;
  std::vector<double> ref(x.size());
  narrow_->swish(x.data(), ref.data(), x.size());
  wide_->swish(y.data(), y.data(), y.size());
  EXPECT_EQ(y, ref);
}

TEST(Dispatch, SelectByName) {
  const KernelTable* before = &active_kernels();
  ASSERT_TRUE(select_kernels("scalar"));
  EXPECT_EQ(&active_kernels(), &scalar_kernels());
  EXPECT_FALSE(select_kernels("nonexistent"));
  EXPECT_EQ(&active_kernels(), &scalar_kernels());
  if (avx2_kernels()) {
    ASSERT_TRUE(select_kernels("avx2"));
    EXPECT_EQ(&active_kernels(), avx2_kernels());
  }
  if (avx512_kernels()) {
    ASSERT_TRUE(select_kernels("avx512"));
    EXPECT_STREQ(active_kernels().name, "avx512");
  }
  select_kernels(before->name);
  EXPECT_EQ(&active_kernels(), before);
}

}  // namespace
}  // namespace pets::simd
