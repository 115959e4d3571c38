// AArch64 only; NEON is part of the base ISA there, so no runtime check is needed.
#include <arm_neon.h>

#include "hpmf/kernels.hpp"

namespace hpmf::kernels {

namespace {

double dot_neon(const double* a, const double* b, std::size_t k) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= k; i += 2) acc = vfmaq_f64(acc, vld1q_f64(a + i), vld1q_f64(b + i));
  double s = vaddvq_f64(acc);
  for (; i < k; ++i) s += a[i] * b[i];
  return s;
}

double squared_distance_neon(const double* a, const double* b, std::size_t k) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= k; i += 2) {
    float64x2_t d = vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i));
    acc = vfmaq_f64(acc, d, d);
  }
  double s = vaddvq_f64(acc);
  for (; i < k; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void axpy_neon(double alpha, const double* x, double* y, std::size_t k) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= k; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
  for (; i < k; ++i) y[i] += alpha * x[i];
}

void sgd_step_neon(double* out, const double* w, const double* other, double data_step, const double* anchor_a,
                   const double* anchor_b, double reg_step, std::size_t k) {
  const float64x2_t vd = vdupq_n_f64(data_step);
  const float64x2_t vr = vdupq_n_f64(reg_step);
  std::size_t i = 0;
  for (; i + 2 <= k; i += 2) {
    const float64x2_t wi = vld1q_f64(w + i);
    float64x2_t pull = vsubq_f64(wi, vld1q_f64(anchor_a + i));
    if (anchor_b) pull = vaddq_f64(pull, vsubq_f64(wi, vld1q_f64(anchor_b + i)));
    float64x2_t r = vfmaq_f64(wi, vd, vld1q_f64(other + i));
    r = vfmsq_f64(r, vr, pull);
    vst1q_f64(out + i, r);
  }
  for (; i < k; ++i) {
    double pull = w[i] - anchor_a[i];
    if (anchor_b) pull += w[i] - anchor_b[i];
    out[i] = w[i] + data_step * other[i] - reg_step * pull;
  }
}

const KernelSet kNeon{"neon", dot_neon, squared_distance_neon, axpy_neon, sgd_step_neon};

}  // namespace

namespace detail {
const KernelSet* neon_impl() { return &kNeon; }
}  // namespace detail

}  // namespace hpmf::kernels
