// Copyright Contributors to the sctn-flow project
// SPDX-License-Identifier: Apache-2.0

// AVX2 variants. Built with -mavx2 -mfma -ffp-contract=off so that the
// elementwise kernels round exactly like the scalar reference.

#include <immintrin.h>

#include <cmath>
#include <limits>

#include "sctn/kernels.hpp"

namespace sctn::kernels {
namespace {

inline double hsum(__m256d v) noexcept {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot_avx2(const double* a, const double* b, std::size_t n) noexcept {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  double total = hsum(acc);
  for (; i < n; ++i) total += a[i] * b[i];
  return total;
}

void axpy_avx2(double* y, double alpha, const double* x, std::size_t n) noexcept {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
  }
  for (; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

void scale_add_avx2(double* y, const double* x, double shift, double alpha,
                    std::size_t n) noexcept {
  const __m256d va = _mm256_set1_pd(alpha);
  const __m256d vs = _mm256_set1_pd(shift);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_mul_pd(va, _mm256_add_pd(_mm256_loadu_pd(x + i), vs)));
  }
  for (; i < n; ++i) y[i] = alpha * (x[i] + shift);
}

void scaled_diff_avx2(double* y, const double* a, const double* b, double alpha,
                      std::size_t n) noexcept {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    _mm256_storeu_pd(y + i, _mm256_mul_pd(va, d));
  }
  for (; i < n; ++i) y[i] = alpha * (a[i] - b[i]);
}

// Cephes-style exp: range reduction by ln2, Pade approximant on [-ln2/2, ln2/2],
// exponent rebuilt from the integer part. Inputs below -708.39 flush to zero
// and inputs above 709 saturate at exp(709).
inline __m256d exp4(__m256d x) noexcept {
  const __m256d hi = _mm256_set1_pd(709.0);
  const __m256d lo = _mm256_set1_pd(-708.39641853226408);
  const __m256d underflow = _mm256_cmp_pd(x, lo, _CMP_LT_OQ);
  x = _mm256_min_pd(_mm256_max_pd(x, lo), hi);

  const __m256d fx = _mm256_round_pd(_mm256_mul_pd(x, _mm256_set1_pd(1.4426950408889634073599)),
                                     _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  x = _mm256_sub_pd(x, _mm256_mul_pd(fx, _mm256_set1_pd(6.93145751953125E-1)));
  x = _mm256_sub_pd(x, _mm256_mul_pd(fx, _mm256_set1_pd(1.42860682030941723212E-6)));

  const __m256d xx = _mm256_mul_pd(x, x);
  __m256d px = _mm256_set1_pd(1.26177193074810590878E-4);
  px = _mm256_add_pd(_mm256_mul_pd(px, xx), _mm256_set1_pd(3.02994407707441961300E-2));
  px = _mm256_add_pd(_mm256_mul_pd(px, xx), _mm256_set1_pd(9.99999999999999999910E-1));
  px = _mm256_mul_pd(px, x);
  __m256d qx = _mm256_set1_pd(3.00198505138664455042E-6);
  qx = _mm256_add_pd(_mm256_mul_pd(qx, xx), _mm256_set1_pd(2.52448340349684104192E-3));
  qx = _mm256_add_pd(_mm256_mul_pd(qx, xx), _mm256_set1_pd(2.27265548208155028766E-1));
  qx = _mm256_add_pd(_mm256_mul_pd(qx, xx), _mm256_set1_pd(2.00000000000000000009E0));
  __m256d r = _mm256_div_pd(px, _mm256_sub_pd(qx, px));
  r = _mm256_add_pd(_mm256_set1_pd(1.0), _mm256_add_pd(r, r));

  // 2^fx: 1.5*2^52 places the integer in the low mantissa bits.
  const __m256i bits = _mm256_castpd_si256(_mm256_add_pd(fx, _mm256_set1_pd(6755399441055744.0)));
  const __m256i expo = _mm256_slli_epi64(_mm256_add_epi64(bits, _mm256_set1_epi64x(1023)), 52);
  r = _mm256_mul_pd(r, _mm256_castsi256_pd(expo));
  return _mm256_andnot_pd(underflow, r);
}

void exp_avx2(double* x, std::size_t n) noexcept {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(x + i, exp4(_mm256_loadu_pd(x + i)));
  if (i < n) {
    alignas(32) double tail[4] = {0.0, 0.0, 0.0, 0.0};
    for (std::size_t k = 0; i + k < n; ++k) tail[k] = x[i + k];
    _mm256_store_pd(tail, exp4(_mm256_load_pd(tail)));
    for (std::size_t k = 0; i + k < n; ++k) x[i + k] = tail[k];
  }
}

double sum_avx2(const double* x, std::size_t n) noexcept {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  double total = hsum(acc);
  for (; i < n; ++i) total += x[i];
  return total;
}

double max_avx2(const double* x, std::size_t n) noexcept {
  double m = -std::numeric_limits<double>::infinity();
  std::size_t i = 0;
  if (n >= 4) {
    __m256d acc = _mm256_set1_pd(m);
    for (; i + 4 <= n; i += 4) acc = _mm256_max_pd(acc, _mm256_loadu_pd(x + i));
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, acc);
    for (double v : lanes) m = v > m ? v : m;
  }
  for (; i < n; ++i) m = x[i] > m ? x[i] : m;
  return m;
}

constexpr KernelTable kAvx2Table{
    Backend::kAvx2,   "avx2",   dot_avx2, axpy_avx2, scale_add_avx2,
    scaled_diff_avx2, exp_avx2, sum_avx2, max_avx2,
};

}  // namespace

const KernelTable* avx2_table_impl() noexcept { return &kAvx2Table; }

}  // namespace sctn::kernels
