// AVX2/FMA kernel variants. This TU is compiled with -mavx2 -mfma; callers
// must go through the dispatch table, which only installs these after a
// runtime CPU check.

#include "tlr/kernels.hpp"

#include <cmath>
#include <immintrin.h>
#include <limits>

namespace tlr::kernels {

namespace {

constexpr double kExpFlush = -708.396418532264;

double avx2_reduce_min(const double* v, std::size_t n) {
  std::size_t i = 0;
  double m = std::numeric_limits<double>::infinity();
  if (n >= 4) {
    __m256d acc = _mm256_loadu_pd(v);
    for (i = 4; i + 4 <= n; i += 4) acc = _mm256_min_pd(acc, _mm256_loadu_pd(v + i));
    __m128d lo = _mm256_castpd256_pd128(acc);
    __m128d hi = _mm256_extractf128_pd(acc, 1);
    __m128d m2 = _mm_min_pd(lo, hi);
    m2 = _mm_min_sd(m2, _mm_unpackhi_pd(m2, m2));
    m = _mm_cvtsd_f64(m2);
  }
  for (; i < n; ++i) m = v[i] < m ? v[i] : m;
  return m;
}

double avx2_reduce_max(const double* v, std::size_t n) {
  std::size_t i = 0;
  double m = -std::numeric_limits<double>::infinity();
  if (n >= 4) {
    __m256d acc = _mm256_loadu_pd(v);
    for (i = 4; i + 4 <= n; i += 4) acc = _mm256_max_pd(acc, _mm256_loadu_pd(v + i));
    __m128d lo = _mm256_castpd256_pd128(acc);
    __m128d hi = _mm256_extractf128_pd(acc, 1);
    __m128d m2 = _mm_max_pd(lo, hi);
    m2 = _mm_max_sd(m2, _mm_unpackhi_pd(m2, m2));
    m = _mm_cvtsd_f64(m2);
  }
  for (; i < n; ++i) m = v[i] > m ? v[i] : m;
  return m;
}

double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  __m128d s = _mm_add_pd(lo, hi);
  s = _mm_add_sd(s, _mm_unpackhi_pd(s, s));
  return _mm_cvtsd_f64(s);
}

double avx2_sum(const double* v, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(v + i));
  double s = hsum(acc);
  for (; i < n; ++i) s += v[i];
  return s;
}

double avx2_dot(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
  }
  double s = hsum(acc);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

// exp(x) for 4 lanes, Cephes-style: x = n*ln2 + r, exp(r) via a rational
// approximation, then scale by 2^n through the exponent bits. Inputs are
// clamped to the normal range; anything below flushes to +0.
__m256d exp4(__m256d x) {
  const __m256d log2e = _mm256_set1_pd(1.4426950408889634073599);
  const __m256d c1 = _mm256_set1_pd(6.93145751953125e-1);
  const __m256d c2 = _mm256_set1_pd(1.42860682030941723212e-6);

  const __m256d p0 = _mm256_set1_pd(1.26177193074810590878e-4);
  const __m256d p1 = _mm256_set1_pd(3.02994407707441961300e-2);
  const __m256d p2 = _mm256_set1_pd(9.99999999999999999910e-1);
  const __m256d q0 = _mm256_set1_pd(3.00198505138664455042e-6);
  const __m256d q1 = _mm256_set1_pd(2.52448340349684104192e-3);
  const __m256d q2 = _mm256_set1_pd(2.27265548208155028766e-1);
  const __m256d q3 = _mm256_set1_pd(2.00000000000000000005e0);

  __m256d flush_mask = _mm256_cmp_pd(x, _mm256_set1_pd(kExpFlush), _CMP_GE_OQ);
  x = _mm256_min_pd(x, _mm256_set1_pd(709.0));
  x = _mm256_max_pd(x, _mm256_set1_pd(-709.0));

  __m256d n = _mm256_round_pd(_mm256_mul_pd(x, log2e),
                              _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  // r = x - n*ln2, split constant for exact reduction
  __m256d r = _mm256_fnmadd_pd(n, c1, x);
  r = _mm256_fnmadd_pd(n, c2, r);

  __m256d r2 = _mm256_mul_pd(r, r);
  __m256d p = _mm256_fmadd_pd(p0, r2, p1);
  p = _mm256_fmadd_pd(p, r2, p2);
  p = _mm256_mul_pd(p, r);
  __m256d q = _mm256_fmadd_pd(q0, r2, q1);
  q = _mm256_fmadd_pd(q, r2, q2);
  q = _mm256_fmadd_pd(q, r2, q3);
  __m256d expr = _mm256_add_pd(_mm256_set1_pd(1.0),
                               _mm256_div_pd(_mm256_mul_pd(_mm256_set1_pd(2.0), p),
                                             _mm256_sub_pd(q, p)));

  // 2^n via exponent bits (n is within +-1075 after the clamp above)
  __m128i n32 = _mm256_cvtpd_epi32(n);
  __m256i n64 = _mm256_cvtepi32_epi64(n32);
  __m256i bits = _mm256_add_epi64(n64, _mm256_set1_epi64x(1023));
  bits = _mm256_slli_epi64(bits, 52);
  __m256d pow2n = _mm256_castsi256_pd(bits);

  __m256d result = _mm256_mul_pd(expr, pow2n);
  return _mm256_and_pd(result, flush_mask);
}

void avx2_exp_affine(const double* v, std::size_t n, double scale, double shift, double* out) {
  const __m256d vs = _mm256_set1_pd(scale);
  const __m256d vb = _mm256_set1_pd(shift);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d x = _mm256_fmadd_pd(_mm256_loadu_pd(v + i), vs, vb);
    _mm256_storeu_pd(out + i, exp4(x));
  }
  for (; i < n; ++i) {
    double x = scale * v[i] + shift;
    out[i] = x < kExpFlush ? 0.0 : std::exp(x);
  }
}

constexpr Ops kAvx2Ops{
    avx2_reduce_min, avx2_reduce_max, avx2_sum, avx2_dot, avx2_exp_affine, "avx2"};

} // namespace

const Ops* avx2() {
  static const Ops* ops = [] {
    bool ok = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    return ok ? &kAvx2Ops : nullptr;
  }();
  return ops;
}

} // namespace tlr::kernels
