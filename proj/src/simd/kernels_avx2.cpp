#include "ddlcn/simd/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define DDLCN_HAVE_AVX2_TU 1
#include <immintrin.h>
#else
#define DDLCN_HAVE_AVX2_TU 0
#endif

namespace ddlcn::simd {

#if DDLCN_HAVE_AVX2_TU
namespace {

// This file is compiled with -mavx2 -mfma; nothing here may run before the
// cpuid check in avx2_kernels().

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double squared_distance_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    const __m256d d1 = _mm256_sub_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4));
    acc0 = _mm256_fmadd_pd(d0, d0, acc0);
    acc1 = _mm256_fmadd_pd(d1, d1, acc1);
  }
  for (; i + 4 <= n; i += 4) {
    const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc0 = _mm256_fmadd_pd(d0, d0, acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void scale_avx2(double* x, double alpha, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(x + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), va));
  for (; i < n; ++i) x[i] *= alpha;
}

// _mm256_max_pd(a, b) returns b when either is NaN; operands are ordered so
// the scalar std::max(acc, x) semantics (keep acc unless x > acc) hold.
void max_avx2(double* acc, const double* x, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d a = _mm256_loadu_pd(acc + i);
    const __m256d v = _mm256_loadu_pd(x + i);
    _mm256_storeu_pd(acc + i, _mm256_blendv_pd(a, v, _mm256_cmp_pd(a, v, _CMP_LT_OQ)));
  }
  for (; i < n; ++i) acc[i] = acc[i] < x[i] ? x[i] : acc[i];
}

void min_avx2(double* acc, const double* x, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d a = _mm256_loadu_pd(acc + i);
    const __m256d v = _mm256_loadu_pd(x + i);
    _mm256_storeu_pd(acc + i, _mm256_blendv_pd(a, v, _mm256_cmp_pd(v, a, _CMP_LT_OQ)));
  }
  for (; i < n; ++i) acc[i] = x[i] < acc[i] ? x[i] : acc[i];
}

void clip_max_avx2(double* x, double hi, std::size_t n) {
  const __m256d vh = _mm256_set1_pd(hi);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(x + i);
    _mm256_storeu_pd(x + i, _mm256_blendv_pd(v, vh, _mm256_cmp_pd(vh, v, _CMP_LT_OQ)));
  }
  for (; i < n; ++i) x[i] = hi < x[i] ? hi : x[i];
}

constexpr KernelTable kAvx2{
    "avx2",   dot_avx2, squared_distance_avx2, axpy_avx2, scale_avx2,
    max_avx2, min_avx2, clip_max_avx2,
};

}  // namespace

const KernelTable* avx2_kernels() {
  static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? &kAvx2 : nullptr;
}

#else

const KernelTable* avx2_kernels() { return nullptr; }

#endif

}  // namespace ddlcn::simd
