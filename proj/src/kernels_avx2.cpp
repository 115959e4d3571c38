// Compiled with -mavx2 -mfma; only reached after the runtime CPU check in kernels.cpp.
#include <immintrin.h>

#include "hpmf/kernels.hpp"

namespace hpmf::kernels {

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d swapped = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

double dot_avx2(const double* a, const double* b, std::size_t k) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= k; i += 4) acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
  double s = hsum(acc);
  for (; i < k; ++i) s += a[i] * b[i];
  return s;
}

double squared_distance_avx2(const double* a, const double* b, std::size_t k) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= k; i += 4) {
    __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_fmadd_pd(d, d, acc);
  }
  double s = hsum(acc);
  for (; i < k; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t k) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= k; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < k; ++i) y[i] += alpha * x[i];
}

void sgd_step_avx2(double* out, const double* w, const double* other, double data_step, const double* anchor_a,
                   const double* anchor_b, double reg_step, std::size_t k) {
  const __m256d vd = _mm256_set1_pd(data_step);
  const __m256d vr = _mm256_set1_pd(reg_step);
  std::size_t i = 0;
  for (; i + 4 <= k; i += 4) {
    const __m256d wi = _mm256_loadu_pd(w + i);
    __m256d pull = _mm256_sub_pd(wi, _mm256_loadu_pd(anchor_a + i));
    if (anchor_b) pull = _mm256_add_pd(pull, _mm256_sub_pd(wi, _mm256_loadu_pd(anchor_b + i)));
    __m256d r = _mm256_fmadd_pd(vd, _mm256_loadu_pd(other + i), wi);
    r = _mm256_fnmadd_pd(vr, pull, r);
    _mm256_storeu_pd(out + i, r);
  }
  for (; i < k; ++i) {
    double pull = w[i] - anchor_a[i];
    if (anchor_b) pull += w[i] - anchor_b[i];
    out[i] = w[i] + data_step * other[i] - reg_step * pull;
  }
}

const KernelSet kAvx2{"avx2", dot_avx2, squared_distance_avx2, axpy_avx2, sgd_step_avx2};

}  // namespace

namespace detail {
const KernelSet* avx2_impl() { return &kAvx2; }
}  // namespace detail

}  // namespace hpmf::kernels
