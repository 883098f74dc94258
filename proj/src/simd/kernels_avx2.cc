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

#ifdef __x86_64__
#if !defined(__AVX2__) || !defined(__FMA__)
#error "this should be compiled with -mavx2 -mfma"
#endif
#endif

#include <immintrin.h>

#include <cmath>
#include <cstdint>

#include "pets/simd/kernels.h"

namespace pets::simd {
namespace {

// exp(x): x = n ln2 + r with |r| <= ln2/2, e^r from a degree-13 Taylor
// polynomial (truncation < 1e-17), 2^n built in the exponent field.
// Inputs below -708 flush to zero instead of going subnormal.
inline __m256d exp_pd(__m256d x) {
  const __m256d hi = _mm256_set1_pd(709.782712893384);  // ln(DBL_MAX)
  const __m256d lo = _mm256_set1_pd(-708.0);
  const __m256d log2e = _mm256_set1_pd(1.4426950408889634074);
  const __m256d ln2_hi = _mm256_set1_pd(6.93145751953125e-1);
  const __m256d ln2_lo = _mm256_set1_pd(1.42860682030941723212e-6);

  const __m256d xc = _mm256_min_pd(_mm256_max_pd(x, lo), hi);
  const __m256d n = _mm256_round_pd(_mm256_mul_pd(xc, log2e),
                                    _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, ln2_hi, xc);
  r = _mm256_fnmadd_pd(n, ln2_lo, r);

  // e^r = 1 + r + r^2 t(r). The tail t is small, so evaluating it by
  // Estrin (short dependency chains) costs nothing in accuracy.
  const __m256d r2 = _mm256_mul_pd(r, r);
  const __m256d r4 = _mm256_mul_pd(r2, r2);
  const __m256d r8 = _mm256_mul_pd(r4, r4);
  auto pair = [&](double c0, double c1) {
    return _mm256_fmadd_pd(_mm256_set1_pd(c1), r, _mm256_set1_pd(c0));
  };
  const __m256d p23 = pair(1.0 / 2.0, 1.0 / 6.0);
  const __m256d p45 = pair(1.0 / 24.0, 1.0 / 120.0);
  const __m256d p67 = pair(1.0 / 720.0, 1.0 / 5040.0);
  const __m256d p89 = pair(1.0 / 40320.0, 1.0 / 362880.0);
  const __m256d p1011 = pair(1.0 / 3628800.0, 1.0 / 39916800.0);
  const __m256d p1213 = pair(1.0 / 479001600.0, 1.0 / 6227020800.0);
  const __m256d a = _mm256_fmadd_pd(p45, r2, p23);
  const __m256d b = _mm256_fmadd_pd(p89, r2, p67);
  const __m256d c = _mm256_fmadd_pd(p1213, r2, p1011);
  const __m256d tail = _mm256_fmadd_pd(c, r8, _mm256_fmadd_pd(b, r4, a));
  const __m256d p = _mm256_add_pd(_mm256_set1_pd(1.0), _mm256_fmadd_pd(r2, tail, r));

  const __m128i n32 = _mm256_cvtpd_epi32(n);
  __m256i bits = _mm256_cvtepi32_epi64(n32);
  // 2^(n-1) then a doubling: n reaches 1024 just below the overflow
  // threshold. Both products are exact in the normal range.
  bits = _mm256_add_epi64(bits, _mm256_set1_epi64x(1022));
  bits = _mm256_slli_epi64(bits, 52);
  __m256d result = _mm256_mul_pd(p, _mm256_castsi256_pd(bits));
  result = _mm256_add_pd(result, result);

  result = _mm256_blendv_pd(result, _mm256_set1_pd(HUGE_VAL),
                            _mm256_cmp_pd(x, hi, _CMP_GT_OQ));
  result = _mm256_blendv_pd(result, _mm256_setzero_pd(),
                            _mm256_cmp_pd(x, lo, _CMP_LT_OQ));
  return _mm256_blendv_pd(result, x, _mm256_cmp_pd(x, x, _CMP_UNORD_Q));
}

// log(1 + u) for u in [0, 1]. y = 1 + u is split as m * 2^e with
// m in [1/sqrt2, sqrt2); ln m from the atanh series in f = (m-1)/(m+1),
// |f| <= 0.1716. The last term compensates the rounding of 1 + u.
inline __m256d log1p_unit_pd(__m256d u) {
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d y = _mm256_add_pd(one, u);
  const __m256d sqrt2 = _mm256_set1_pd(1.4142135623730950488);
  const __m256d big = _mm256_cmp_pd(y, sqrt2, _CMP_GT_OQ);
  const __m256d m = _mm256_blendv_pd(y, _mm256_mul_pd(y, _mm256_set1_pd(0.5)), big);
  const __m256d e = _mm256_and_pd(big, one);

  const __m256d f = _mm256_div_pd(_mm256_sub_pd(m, one), _mm256_add_pd(m, one));
  const __m256d s = _mm256_mul_pd(f, f);
  __m256d p = _mm256_set1_pd(1.0 / 23.0);
  p = _mm256_fmadd_pd(p, s, _mm256_set1_pd(1.0 / 21.0));
  p = _mm256_fmadd_pd(p, s, _mm256_set1_pd(1.0 / 19.0));
  p = _mm256_fmadd_pd(p, s, _mm256_set1_pd(1.0 / 17.0));
  p = _mm256_fmadd_pd(p, s, _mm256_set1_pd(1.0 / 15.0));
  p = _mm256_fmadd_pd(p, s, _mm256_set1_pd(1.0 / 13.0));
  p = _mm256_fmadd_pd(p, s, _mm256_set1_pd(1.0 / 11.0));
  p = _mm256_fmadd_pd(p, s, _mm256_set1_pd(1.0 / 9.0));
  p = _mm256_fmadd_pd(p, s, _mm256_set1_pd(1.0 / 7.0));
  p = _mm256_fmadd_pd(p, s, _mm256_set1_pd(1.0 / 5.0));
  p = _mm256_fmadd_pd(p, s, _mm256_set1_pd(1.0 / 3.0));
  // ln m = 2f + 2f*s*p
  const __m256d two_f = _mm256_add_pd(f, f);
  __m256d ln_m = _mm256_fmadd_pd(_mm256_mul_pd(two_f, s), p, two_f);

  const __m256d ln2 = _mm256_set1_pd(0.69314718055994530942);
  const __m256d correction =
      _mm256_div_pd(_mm256_sub_pd(_mm256_sub_pd(y, one), u), y);
  return _mm256_sub_pd(_mm256_fmadd_pd(e, ln2, ln_m), correction);
}

inline __m256d swish_pd(__m256d x) {
  const __m256d neg_x = _mm256_sub_pd(_mm256_setzero_pd(), x);
  return _mm256_div_pd(x, _mm256_add_pd(_mm256_set1_pd(1.0), exp_pd(neg_x)));
}

inline __m256d softplus_pd(__m256d x) {
  const __m256d sign = _mm256_set1_pd(-0.0);
  const __m256d neg_abs = _mm256_or_pd(x, sign);
  const __m256d pos = _mm256_max_pd(x, _mm256_setzero_pd());
  return _mm256_add_pd(pos, log1p_unit_pd(exp_pd(neg_abs)));
}

// Quadrant reduction by pi/2 (three-part Cody-Waite constants) followed by
// minimax kernels on |r| <= pi/4. Valid for |x| < 2^30.
inline void sincos_pd(__m256d x, __m256d* s_out, __m256d* c_out) {
  const __m256d two_over_pi = _mm256_set1_pd(6.36619772367581382433e-01);
  const __m256d pio2_1 = _mm256_set1_pd(1.57079632673412561417e+00);
  const __m256d pio2_2 = _mm256_set1_pd(6.07710050630396597660e-11);
  const __m256d pio2_3 = _mm256_set1_pd(2.02226624871116645580e-21);

  const __m256d n = _mm256_round_pd(_mm256_mul_pd(x, two_over_pi),
                                    _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, pio2_1, x);
  r = _mm256_fnmadd_pd(n, pio2_2, r);
  r = _mm256_fnmadd_pd(n, pio2_3, r);
  const __m256d z = _mm256_mul_pd(r, r);

  __m256d ps = _mm256_set1_pd(1.58969099521155010221e-10);
  ps = _mm256_fmadd_pd(ps, z, _mm256_set1_pd(-2.50507602534068634195e-08));
  ps = _mm256_fmadd_pd(ps, z, _mm256_set1_pd(2.75573137070700676789e-06));
  ps = _mm256_fmadd_pd(ps, z, _mm256_set1_pd(-1.98412698298579493134e-04));
  ps = _mm256_fmadd_pd(ps, z, _mm256_set1_pd(8.33333333332248946124e-03));
  ps = _mm256_fmadd_pd(ps, z, _mm256_set1_pd(-1.66666666666666324348e-01));
  const __m256d sin_r = _mm256_fmadd_pd(_mm256_mul_pd(r, z), ps, r);

  __m256d pc = _mm256_set1_pd(-1.13596475577881948265e-11);
  pc = _mm256_fmadd_pd(pc, z, _mm256_set1_pd(2.08757232129817482790e-09));
  pc = _mm256_fmadd_pd(pc, z, _mm256_set1_pd(-2.75573143513906633035e-07));
  pc = _mm256_fmadd_pd(pc, z, _mm256_set1_pd(2.48015872894767294178e-05));
  pc = _mm256_fmadd_pd(pc, z, _mm256_set1_pd(-1.38888888888741095749e-03));
  pc = _mm256_fmadd_pd(pc, z, _mm256_set1_pd(4.16666666666666019037e-02));
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d half_z = _mm256_mul_pd(z, _mm256_set1_pd(0.5));
  const __m256d w = _mm256_sub_pd(one, half_z);
  // cos r = w + ((1 - w) - z/2) + z^2 * pc
  const __m256d tail = _mm256_sub_pd(_mm256_sub_pd(one, w), half_z);
  const __m256d cos_r =
      _mm256_add_pd(w, _mm256_fmadd_pd(_mm256_mul_pd(z, z), pc, tail));

  const __m256i q = _mm256_cvtepi32_epi64(_mm256_cvtpd_epi32(n));
  const __m256i one_i = _mm256_set1_epi64x(1);
  const __m256i two_i = _mm256_set1_epi64x(2);
  const __m256d swap = _mm256_castsi256_pd(
      _mm256_cmpeq_epi64(_mm256_and_si256(q, one_i), one_i));
  const __m256d sin_sign =
      _mm256_castsi256_pd(_mm256_slli_epi64(_mm256_and_si256(q, two_i), 62));
  const __m256d cos_sign = _mm256_castsi256_pd(_mm256_slli_epi64(
      _mm256_and_si256(_mm256_add_epi64(q, one_i), two_i), 62));

  *s_out = _mm256_xor_pd(_mm256_blendv_pd(sin_r, cos_r, swap), sin_sign);
  *c_out = _mm256_xor_pd(_mm256_blendv_pd(cos_r, sin_r, swap), cos_sign);
}

template <int kVecs>
inline void affine_block(const double* x0, const double* x1, std::size_t in_dim,
                         const double* weights, std::size_t out_dim,
                         const double* bias, double* y0, double* y1) {
  __m256d a[kVecs];
  __m256d b[kVecs];
  for (int v = 0; v < kVecs; ++v) {
    a[v] = _mm256_loadu_pd(bias + 4 * v);
    b[v] = a[v];
  }
  for (std::size_t k = 0; k < in_dim; ++k) {
    const double* w = weights + k * out_dim;
    const __m256d xa = _mm256_broadcast_sd(x0 + k);
    const __m256d xb = _mm256_broadcast_sd(x1 + k);
    for (int v = 0; v < kVecs; ++v) {
      const __m256d wv = _mm256_loadu_pd(w + 4 * v);
      a[v] = _mm256_fmadd_pd(xa, wv, a[v]);
      b[v] = _mm256_fmadd_pd(xb, wv, b[v]);
    }
  }
  for (int v = 0; v < kVecs; ++v) {
    _mm256_storeu_pd(y0 + 4 * v, a[v]);
    _mm256_storeu_pd(y1 + 4 * v, b[v]);
  }
}

void affine_avx2(const double* in, std::size_t rows, std::size_t in_dim,
                 const double* weights, const double* bias, std::size_t out_dim,
                 double* out) {
  // Rows are processed in pairs so each weight vector load feeds two FMAs.
  for (std::size_t r = 0; r < rows; r += 2) {
    const double* x0 = in + r * in_dim;
    double* y0 = out + r * out_dim;
    const bool pair = r + 1 < rows;
    const double* x1 = pair ? x0 + in_dim : x0;
    double scratch[16];
    double* y1 = pair ? y0 + out_dim : scratch;

    std::size_t j = 0;
    for (; j + 16 <= out_dim; j += 16) {
      double* y1j = pair ? y1 + j : scratch;
      affine_block<4>(x0, x1, in_dim, weights + j, out_dim, bias + j, y0 + j, y1j);
    }
    for (; j + 4 <= out_dim; j += 4) {
      double* y1j = pair ? y1 + j : scratch;
      affine_block<1>(x0, x1, in_dim, weights + j, out_dim, bias + j, y0 + j, y1j);
    }
    for (; j < out_dim; ++j) {
      double a = bias[j];
      double b = bias[j];
      for (std::size_t k = 0; k < in_dim; ++k) {
        a = std::fma(x0[k], weights[k * out_dim + j], a);
        b = std::fma(x1[k], weights[k * out_dim + j], b);
      }
      y0[j] = a;
      if (pair) y1[j] = b;
    }
  }
}

template <typename VecOp>
inline void map_pd(const double* in, double* out, std::size_t n, VecOp vec_op) {
  std::size_t i = 0;
  // Four independent vectors per pass hide the polynomial latency chains.
  for (; i + 16 <= n; i += 16) {
    const __m256d r0 = vec_op(_mm256_loadu_pd(in + i));
    const __m256d r1 = vec_op(_mm256_loadu_pd(in + i + 4));
    const __m256d r2 = vec_op(_mm256_loadu_pd(in + i + 8));
    const __m256d r3 = vec_op(_mm256_loadu_pd(in + i + 12));
    _mm256_storeu_pd(out + i, r0);
    _mm256_storeu_pd(out + i + 4, r1);
    _mm256_storeu_pd(out + i + 8, r2);
    _mm256_storeu_pd(out + i + 12, r3);
  }
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, vec_op(_mm256_loadu_pd(in + i)));
  }
  if (i < n) {
    // Pad the tail into a full vector so the tail uses the same arithmetic.
    alignas(32) double buf[4] = {0.0, 0.0, 0.0, 0.0};
    for (std::size_t t = i; t < n; ++t) buf[t - i] = in[t];
    alignas(32) double res[4];
    _mm256_store_pd(res, vec_op(_mm256_load_pd(buf)));
    for (std::size_t t = i; t < n; ++t) out[t] = res[t - i];
  }
}

void swish_avx2(const double* in, double* out, std::size_t n) {
  map_pd(in, out, n, swish_pd);
}

void exp_avx2(const double* in, double* out, std::size_t n) {
  map_pd(in, out, n, exp_pd);
}

void softplus_avx2(const double* in, double* out, std::size_t n) {
  map_pd(in, out, n, softplus_pd);
}

void sincos_avx2(const double* in, double* s, double* c, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d sv, cv;
    sincos_pd(_mm256_loadu_pd(in + i), &sv, &cv);
    _mm256_storeu_pd(s + i, sv);
    _mm256_storeu_pd(c + i, cv);
  }
  if (i < n) {
    alignas(32) double buf[4] = {0.0, 0.0, 0.0, 0.0};
    for (std::size_t t = i; t < n; ++t) buf[t - i] = in[t];
    __m256d sv, cv;
    sincos_pd(_mm256_load_pd(buf), &sv, &cv);
    alignas(32) double sr[4], cr[4];
    _mm256_store_pd(sr, sv);
    _mm256_store_pd(cr, cv);
    for (std::size_t t = i; t < n; ++t) {
      s[t] = sr[t - i];
      c[t] = cr[t - i];
    }
  }
}

constexpr KernelTable kAvx2{
    .name = "avx2",
    .affine = affine_avx2,
    .swish = swish_avx2,
    .exp = exp_avx2,
    .softplus = softplus_avx2,
    .sincos = sincos_avx2,
};

}  // namespace

const KernelTable* avx2_kernels_unchecked() { return &kAvx2; }

}  // namespace pets::simd
