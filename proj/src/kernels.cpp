#include "hpmf/kernels.hpp"

#include <atomic>
#include <cstdlib>

namespace hpmf::kernels {

namespace detail {
const KernelSet* avx2_impl();
const KernelSet* neon_impl();
}  // namespace detail

namespace {

double dot_scalar(const double* a, const double* b, std::size_t k) {
  double s = 0.0;
  for (std::size_t i = 0; i < k; ++i) s += a[i] * b[i];
  return s;
}

double squared_distance_scalar(const double* a, const double* b, std::size_t k) {
  double s = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t k) {
  for (std::size_t i = 0; i < k; ++i) y[i] += alpha * x[i];
}

void sgd_step_scalar(double* out, const double* w, const double* other, double data_step, const double* anchor_a,
                     const double* anchor_b, double reg_step, std::size_t k) {
  if (anchor_b) {
    for (std::size_t i = 0; i < k; ++i) {
      const double pull = (w[i] - anchor_a[i]) + (w[i] - anchor_b[i]);
      out[i] = w[i] + data_step * other[i] - reg_step * pull;
    }
  } else {
    for (std::size_t i = 0; i < k; ++i) {
      const double pull = w[i] - anchor_a[i];
      out[i] = w[i] + data_step * other[i] - reg_step * pull;
    }
  }
}

const KernelSet kScalar{"scalar", dot_scalar, squared_distance_scalar, axpy_scalar, sgd_step_scalar};

const KernelSet* from_env() {
  const char* env = std::getenv("HPMF_KERNEL");
  if (!env) return nullptr;
  std::string_view want(env);
  for (const KernelSet* k : available()) {
    if (k->name == want) return k;
  }
  return nullptr;
}

const KernelSet* widest() {
  if (const KernelSet* k = avx2()) return k;
  if (const KernelSet* k = neon()) return k;
  return &kScalar;
}

std::atomic<const KernelSet*>& current() {
  static std::atomic<const KernelSet*> slot{[] {
    const KernelSet* k = from_env();
    return k ? k : widest();
  }()};
  return slot;
}

}  // namespace

const KernelSet& scalar() { return kScalar; }

const KernelSet* avx2() {
#if defined(HPMF_HAVE_AVX2)
#if defined(__GNUC__) || defined(__clang__)
  static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? detail::avx2_impl() : nullptr;
#else
  return detail::avx2_impl();
#endif
#else
  return nullptr;
#endif
}

const KernelSet* neon() {
#if defined(HPMF_HAVE_NEON)
  return detail::neon_impl();
#else
  return nullptr;
#endif
}

std::vector<const KernelSet*> available() {
  std::vector<const KernelSet*> out{&kScalar};
  if (const KernelSet* k = avx2()) out.push_back(k);
  if (const KernelSet* k = neon()) out.push_back(k);
  return out;
}

const KernelSet& active() { return *current().load(std::memory_order_relaxed); }

bool select(std::string_view name) {
  for (const KernelSet* k : available()) {
    if (k->name == name) {
      current().store(k, std::memory_order_relaxed);
      return true;
    }
  }
  return false;
}

}  // namespace hpmf::kernels
