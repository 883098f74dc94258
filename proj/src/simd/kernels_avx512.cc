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

// 512-bit ports of the AVX2 kernels. Every elementwise routine performs the
// same operations in the same order as its 256-bit twin, so the two tables
// agree bit for bit; only the vector width changes.

#ifdef __x86_64__
#if !defined(__AVX512F__) || !defined(__AVX512DQ__)
#error "this should be compiled with -mavx512f -mavx512dq"
#endif
#endif

#include <immintrin.h>

#include <cmath>
#include <cstdint>

#include "pets/simd/kernels.h"

namespace pets::simd {
namespace {

inline __m512d exp_pd(__m512d x) {
  const __m512d hi = _mm512_set1_pd(709.782712893384);  // ln(DBL_MAX)
  const __m512d lo = _mm512_set1_pd(-708.0);
  const __m512d log2e = _mm512_set1_pd(1.4426950408889634074);
  const __m512d ln2_hi = _mm512_set1_pd(6.93145751953125e-1);
  const __m512d ln2_lo = _mm512_set1_pd(1.42860682030941723212e-6);

  const __m512d xc = _mm512_min_pd(_mm512_max_pd(x, lo), hi);
  const __m512d n = _mm512_roundscale_pd(_mm512_mul_pd(xc, log2e),
                                         _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m512d r = _mm512_fnmadd_pd(n, ln2_hi, xc);
  r = _mm512_fnmadd_pd(n, ln2_lo, r);

  const __m512d r2 = _mm512_mul_pd(r, r);
  const __m512d r4 = _mm512_mul_pd(r2, r2);
  const __m512d r8 = _mm512_mul_pd(r4, r4);
  auto pair = [&](double c0, double c1) {
    return _mm512_fmadd_pd(_mm512_set1_pd(c1), r, _mm512_set1_pd(c0));
  };
  const __m512d p23 = pair(1.0 / 2.0, 1.0 / 6.0);
  const __m512d p45 = pair(1.0 / 24.0, 1.0 / 120.0);
  const __m512d p67 = pair(1.0 / 720.0, 1.0 / 5040.0);
  const __m512d p89 = pair(1.0 / 40320.0, 1.0 / 362880.0);
  const __m512d p1011 = pair(1.0 / 3628800.0, 1.0 / 39916800.0);
  const __m512d p1213 = pair(1.0 / 479001600.0, 1.0 / 6227020800.0);
  const __m512d a = _mm512_fmadd_pd(p45, r2, p23);
  const __m512d b = _mm512_fmadd_pd(p89, r2, p67);
  const __m512d c = _mm512_fmadd_pd(p1213, r2, p1011);
  const __m512d tail = _mm512_fmadd_pd(c, r8, _mm512_fmadd_pd(b, r4, a));
  const __m512d p = _mm512_add_pd(_mm512_set1_pd(1.0), _mm512_fmadd_pd(r2, tail, r));

  __m512i bits = _mm512_cvtepi32_epi64(_mm512_cvtpd_epi32(n));
  bits = _mm512_add_epi64(bits, _mm512_set1_epi64(1022));
  bits = _mm512_slli_epi64(bits, 52);
  __m512d result = _mm512_mul_pd(p, _mm512_castsi512_pd(bits));
  result = _mm512_add_pd(result, result);

  result = _mm512_mask_blend_pd(_mm512_cmp_pd_mask(x, hi, _CMP_GT_OQ), result,
                                _mm512_set1_pd(HUGE_VAL));
  result = _mm512_mask_blend_pd(_mm512_cmp_pd_mask(x, lo, _CMP_LT_OQ), result,
                                _mm512_setzero_pd());
  return _mm512_mask_blend_pd(_mm512_cmp_pd_mask(x, x, _CMP_UNORD_Q), result, x);
}

inline __m512d log1p_unit_pd(__m512d u) {
  const __m512d one = _mm512_set1_pd(1.0);
  const __m512d y = _mm512_add_pd(one, u);
  const __mmask8 big = _mm512_cmp_pd_mask(y, _mm512_set1_pd(1.4142135623730950488), _CMP_GT_OQ);
  const __m512d m = _mm512_mask_blend_pd(big, y, _mm512_mul_pd(y, _mm512_set1_pd(0.5)));
  const __m512d e = _mm512_maskz_mov_pd(big, one);

  const __m512d f = _mm512_div_pd(_mm512_sub_pd(m, one), _mm512_add_pd(m, one));
  const __m512d s = _mm512_mul_pd(f, f);
  __m512d p = _mm512_set1_pd(1.0 / 23.0);
  p = _mm512_fmadd_pd(p, s, _mm512_set1_pd(1.0 / 21.0));
  p = _mm512_fmadd_pd(p, s, _mm512_set1_pd(1.0 / 19.0));
  p = _mm512_fmadd_pd(p, s, _mm512_set1_pd(1.0 / 17.0));
  p = _mm512_fmadd_pd(p, s, _mm512_set1_pd(1.0 / 15.0));
  p = _mm512_fmadd_pd(p, s, _mm512_set1_pd(1.0 / 13.0));
  p = _mm512_fmadd_pd(p, s, _mm512_set1_pd(1.0 / 11.0));
  p = _mm512_fmadd_pd(p, s, _mm512_set1_pd(1.0 / 9.0));
  p = _mm512_fmadd_pd(p, s, _mm512_set1_pd(1.0 / 7.0));
  p = _mm512_fmadd_pd(p, s, _mm512_set1_pd(1.0 / 5.0));
  p = _mm512_fmadd_pd(p, s, _mm512_set1_pd(1.0 / 3.0));
  const __m512d two_f = _mm512_add_pd(f, f);
  const __m512d ln_m = _mm512_fmadd_pd(_mm512_mul_pd(two_f, s), p, two_f);

  const __m512d ln2 = _mm512_set1_pd(0.69314718055994530942);
  const __m512d correction = _mm512_div_pd(_mm512_sub_pd(_mm512_sub_pd(y, one), u), y);
  return _mm512_sub_pd(_mm512_fmadd_pd(e, ln2, ln_m), correction);
}

inline __m512d swish_pd(__m512d x) {
  const __m512d neg_x = _mm512_sub_pd(_mm512_setzero_pd(), x);
  return _mm512_div_pd(x, _mm512_add_pd(_mm512_set1_pd(1.0), exp_pd(neg_x)));
}

inline __m512d softplus_pd(__m512d x) {
  const __m512d neg_abs = _mm512_castsi512_pd(
      _mm512_or_si512(_mm512_castpd_si512(x), _mm512_set1_epi64(INT64_MIN)));
  const __m512d pos = _mm512_max_pd(x, _mm512_setzero_pd());
  return _mm512_add_pd(pos, log1p_unit_pd(exp_pd(neg_abs)));
}

inline void sincos_pd(__m512d x, __m512d* s_out, __m512d* c_out) {
  const __m512d two_over_pi = _mm512_set1_pd(6.36619772367581382433e-01);
  const __m512d pio2_1 = _mm512_set1_pd(1.57079632673412561417e+00);
  const __m512d pio2_2 = _mm512_set1_pd(6.07710050630396597660e-11);
  const __m512d pio2_3 = _mm512_set1_pd(2.02226624871116645580e-21);

  const __m512d n = _mm512_roundscale_pd(_mm512_mul_pd(x, two_over_pi),
                                         _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m512d r = _mm512_fnmadd_pd(n, pio2_1, x);
  r = _mm512_fnmadd_pd(n, pio2_2, r);
  r = _mm512_fnmadd_pd(n, pio2_3, r);
  const __m512d z = _mm512_mul_pd(r, r);

  __m512d ps = _mm512_set1_pd(1.58969099521155010221e-10);
  ps = _mm512_fmadd_pd(ps, z, _mm512_set1_pd(-2.50507602534068634195e-08));
  ps = _mm512_fmadd_pd(ps, z, _mm512_set1_pd(2.75573137070700676789e-06));
  ps = _mm512_fmadd_pd(ps, z, _mm512_set1_pd(-1.98412698298579493134e-04));
  ps = _mm512_fmadd_pd(ps, z, _mm512_set1_pd(8.33333333332248946124e-03));
  ps = _mm512_fmadd_pd(ps, z, _mm512_set1_pd(-1.66666666666666324348e-01));
  const __m512d sin_r = _mm512_fmadd_pd(_mm512_mul_pd(r, z), ps, r);

  __m512d pc = _mm512_set1_pd(-1.13596475577881948265e-11);
  pc = _mm512_fmadd_pd(pc, z, _mm512_set1_pd(2.08757232129817482790e-09));
  pc = _mm512_fmadd_pd(pc, z, _mm512_set1_pd(-2.75573143513906633035e-07));
  pc = _mm512_fmadd_pd(pc, z, _mm512_set1_pd(2.48015872894767294178e-05));
  pc = _mm512_fmadd_pd(pc, z, _mm512_set1_pd(-1.38888888888741095749e-03));
  pc = _mm512_fmadd_pd(pc, z, _mm512_set1_pd(4.16666666666666019037e-02));
  const __m512d one = _mm512_set1_pd(1.0);
  const __m512d half_z = _mm512_mul_pd(z, _mm512_set1_pd(0.5));
  const __m512d w = _mm512_sub_pd(one, half_z);
  const __m512d tail = _mm512_sub_pd(_mm512_sub_pd(one, w), half_z);
  const __m512d cos_r = _mm512_add_pd(w, _mm512_fmadd_pd(_mm512_mul_pd(z, z), pc, tail));

  const __m512i q = _mm512_cvtepi32_epi64(_mm512_cvtpd_epi32(n));
  const __m512i one_i = _mm512_set1_epi64(1);
  const __m512i two_i = _mm512_set1_epi64(2);
  const __mmask8 swap = _mm512_test_epi64_mask(q, one_i);
  const __m512i sin_sign = _mm512_slli_epi64(_mm512_and_si512(q, two_i), 62);
  const __m512i cos_sign =
      _mm512_slli_epi64(_mm512_and_si512(_mm512_add_epi64(q, one_i), two_i), 62);

  const __m512d s = _mm512_mask_blend_pd(swap, sin_r, cos_r);
  const __m512d c = _mm512_mask_blend_pd(swap, cos_r, sin_r);
  *s_out = _mm512_castsi512_pd(_mm512_xor_si512(_mm512_castpd_si512(s), sin_sign));
  *c_out = _mm512_castsi512_pd(_mm512_xor_si512(_mm512_castpd_si512(c), cos_sign));
}

inline __mmask8 tail_mask(std::size_t count) {
  return static_cast<__mmask8>((1u << count) - 1u);
}

// Masked-off lanes load as zero, which keeps them finite and quiet.
template <typename VecOp>
inline void map_pd(const double* in, double* out, std::size_t n, VecOp vec_op) {
  std::size_t i = 0;
  for (; i + 32 <= n; i += 32) {
    const __m512d r0 = vec_op(_mm512_loadu_pd(in + i));
    const __m512d r1 = vec_op(_mm512_loadu_pd(in + i + 8));
    const __m512d r2 = vec_op(_mm512_loadu_pd(in + i + 16));
    const __m512d r3 = vec_op(_mm512_loadu_pd(in + i + 24));
    _mm512_storeu_pd(out + i, r0);
    _mm512_storeu_pd(out + i + 8, r1);
    _mm512_storeu_pd(out + i + 16, r2);
    _mm512_storeu_pd(out + i + 24, r3);
  }
  for (; i + 8 <= n; i += 8) {
    _mm512_storeu_pd(out + i, vec_op(_mm512_loadu_pd(in + i)));
  }
  if (i < n) {
    const __mmask8 m = tail_mask(n - i);
    _mm512_mask_storeu_pd(out + i, m, vec_op(_mm512_maskz_loadu_pd(m, in + i)));
  }
}

void swish_avx512(const double* in, double* out, std::size_t n) { map_pd(in, out, n, swish_pd); }
void exp_avx512(const double* in, double* out, std::size_t n) { map_pd(in, out, n, exp_pd); }
void softplus_avx512(const double* in, double* out, std::size_t n) {
  map_pd(in, out, n, softplus_pd);
}

void sincos_avx512(const double* in, double* s, double* c, std::size_t n) {
  std::size_t i = 0;
  __m512d sv, cv;
  for (; i + 8 <= n; i += 8) {
    sincos_pd(_mm512_loadu_pd(in + i), &sv, &cv);
    _mm512_storeu_pd(s + i, sv);
    _mm512_storeu_pd(c + i, cv);
  }
  if (i < n) {
    const __mmask8 m = tail_mask(n - i);
    sincos_pd(_mm512_maskz_loadu_pd(m, in + i), &sv, &cv);
    _mm512_mask_storeu_pd(s + i, m, sv);
    _mm512_mask_storeu_pd(c + i, m, cv);
  }
}

// Two rows by kVecs*8 columns; bias first, then one FMA per input in order,
// the same summation the scalar kernel performs.
template <int kVecs>
inline void affine_block(const double* x0, const double* x1, std::size_t in_dim,
                         const double* weights, std::size_t out_dim, const double* bias,
                         double* y0, double* y1, __mmask8 m) {
  __m512d a[kVecs];
  __m512d b[kVecs];
  for (int v = 0; v < kVecs; ++v) {
    a[v] = _mm512_maskz_loadu_pd(m, bias + 8 * v);
    b[v] = a[v];
  }
  for (std::size_t k = 0; k < in_dim; ++k) {
    const double* w = weights + k * out_dim;
    const __m512d xa = _mm512_set1_pd(x0[k]);
    const __m512d xb = _mm512_set1_pd(x1[k]);
    for (int v = 0; v < kVecs; ++v) {
      const __m512d wv = _mm512_maskz_loadu_pd(m, w + 8 * v);
      a[v] = _mm512_fmadd_pd(xa, wv, a[v]);
      b[v] = _mm512_fmadd_pd(xb, wv, b[v]);
    }
  }
  for (int v = 0; v < kVecs; ++v) {
    _mm512_mask_storeu_pd(y0 + 8 * v, m, a[v]);
    _mm512_mask_storeu_pd(y1 + 8 * v, m, b[v]);
  }
}

void affine_avx512(const double* in, std::size_t rows, std::size_t in_dim,
                   const double* weights, const double* bias, std::size_t out_dim,
                   double* out) {
  double scratch[32];
  for (std::size_t r = 0; r < rows; r += 2) {
    const double* x0 = in + r * in_dim;
    double* y0 = out + r * out_dim;
    const bool pair = r + 1 < rows;
    const double* x1 = pair ? x0 + in_dim : x0;
    double* y1 = pair ? y0 + out_dim : nullptr;

    std::size_t j = 0;
    for (; j + 32 <= out_dim; j += 32) {
      affine_block<4>(x0, x1, in_dim, weights + j, out_dim, bias + j, y0 + j,
                      pair ? y1 + j : scratch, 0xff);
    }
    for (; j + 8 <= out_dim; j += 8) {
      affine_block<1>(x0, x1, in_dim, weights + j, out_dim, bias + j, y0 + j,
                      pair ? y1 + j : scratch, 0xff);
    }
    if (j < out_dim) {
      affine_block<1>(x0, x1, in_dim, weights + j, out_dim, bias + j, y0 + j,
                      pair ? y1 + j : scratch, tail_mask(out_dim - j));
    }
  }
}

constexpr KernelTable kAvx512{
    .name = "avx512",
    .affine = affine_avx512,
    .swish = swish_avx512,
    .exp = exp_avx512,
    .softplus = softplus_avx512,
    .sincos = sincos_avx512,
};

}  // namespace

const KernelTable* avx512_kernels_unchecked() { return &kAvx512; }

}  // namespace pets::simd
