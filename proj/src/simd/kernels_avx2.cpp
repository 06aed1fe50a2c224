// Copyright The geostat-fps Authors
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

#include "geofps/simd/kernels.hpp"

#if defined(GEOFPS_HAVE_AVX2_TU) && defined(__AVX2__)

#include <immintrin.h>

#include <cmath>

namespace geofps::simd {
namespace {

// exp(x) after Cephes: reduce by n = round(x log2 e) with a two-part ln 2,
// evaluate the rational Pade form, scale by 2^n through the exponent bits.
// Arguments below -708 flush to 0 (the callers only pass x <= 0).
inline __m256d exp_pd(__m256d x) {
  const __m256d hi = _mm256_set1_pd(709.0);
  const __m256d lo = _mm256_set1_pd(-708.0);
  const __m256d under = _mm256_cmp_pd(x, lo, _CMP_LT_OQ);
  x = _mm256_min_pd(_mm256_max_pd(x, lo), hi);

  const __m256d n = _mm256_round_pd(_mm256_mul_pd(x, _mm256_set1_pd(1.4426950408889634073599)),
                                    _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  x = _mm256_sub_pd(x, _mm256_mul_pd(n, _mm256_set1_pd(6.93145751953125E-1)));
  x = _mm256_sub_pd(x, _mm256_mul_pd(n, _mm256_set1_pd(1.42860682030941723212E-6)));

  const __m256d xx = _mm256_mul_pd(x, x);
  __m256d p = _mm256_set1_pd(1.26177193074810590878E-4);
  p = _mm256_fmadd_pd(p, xx, _mm256_set1_pd(3.02994407707441961300E-2));
  p = _mm256_fmadd_pd(p, xx, _mm256_set1_pd(9.99999999999999999910E-1));
  p = _mm256_mul_pd(p, x);
  __m256d q = _mm256_set1_pd(3.00198505138664455042E-6);
  q = _mm256_fmadd_pd(q, xx, _mm256_set1_pd(2.52448340349684104192E-3));
  q = _mm256_fmadd_pd(q, xx, _mm256_set1_pd(2.27265548208155028766E-1));
  q = _mm256_fmadd_pd(q, xx, _mm256_set1_pd(2.00000000000000000009E0));
  __m256d r = _mm256_div_pd(p, _mm256_sub_pd(q, p));
  r = _mm256_fmadd_pd(r, _mm256_set1_pd(2.0), _mm256_set1_pd(1.0));

  // 2^n: (n + 1023) << 52 reinterpreted as a double.
  const __m128i n32 = _mm256_cvtpd_epi32(n);
  __m256i e = _mm256_cvtepi32_epi64(n32);
  e = _mm256_slli_epi64(_mm256_add_epi64(e, _mm256_set1_epi64x(1023)), 52);
  r = _mm256_mul_pd(r, _mm256_castsi256_pd(e));
  return _mm256_andnot_pd(under, r);
}

inline __m256d dist_pd(__m256d x0, __m256d y0, const double* xs, const double* ys) {
  const __m256d dx = _mm256_sub_pd(x0, _mm256_loadu_pd(xs));
  const __m256d dy = _mm256_sub_pd(y0, _mm256_loadu_pd(ys));
  return _mm256_sqrt_pd(_mm256_fmadd_pd(dx, dx, _mm256_mul_pd(dy, dy)));
}

void distance_row_avx2(double x0, double y0, const double* xs, const double* ys, std::size_t n,
                       double* out) {
  const __m256d vx = _mm256_set1_pd(x0);
  const __m256d vy = _mm256_set1_pd(y0);
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) _mm256_storeu_pd(out + j, dist_pd(vx, vy, xs + j, ys + j));
  for (; j < n; ++j) {
    const double dx = x0 - xs[j];
    const double dy = y0 - ys[j];
    out[j] = std::sqrt(dx * dx + dy * dy);
  }
}

void exp_cov_row_avx2(double x0, double y0, const double* xs, const double* ys, std::size_t n,
                      double tau2, double phi, double* out) {
  const __m256d vx = _mm256_set1_pd(x0);
  const __m256d vy = _mm256_set1_pd(y0);
  const __m256d vt = _mm256_set1_pd(tau2);
  const __m256d vp = _mm256_set1_pd(-phi);
  std::size_t j = 0;
  for (; j + 4 <= n; j += 4) {
    const __m256d d = dist_pd(vx, vy, xs + j, ys + j);
    _mm256_storeu_pd(out + j, _mm256_mul_pd(vt, exp_pd(_mm256_mul_pd(vp, d))));
  }
  for (; j < n; ++j) {
    const double dx = x0 - xs[j];
    const double dy = y0 - ys[j];
    out[j] = tau2 * std::exp(-phi * std::sqrt(dx * dx + dy * dy));
  }
}

}  // namespace

const Kernels* avx2_kernels() {
  static const bool ok = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  static const Kernels k{"avx2", &distance_row_avx2, &exp_cov_row_avx2};
  return ok ? &k : nullptr;
}

}  // namespace geofps::simd

#else

namespace geofps::simd {
const Kernels* avx2_kernels() { return nullptr; }
}  // namespace geofps::simd

#endif
