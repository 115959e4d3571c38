#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace hpmf::kernels {

// Inner loops over k-dimensional latent vectors. Each backend provides the
// same operations; results agree with the scalar reference up to
// floating-point reassociation.
struct KernelSet {
  std::string_view name;

  double (*dot)(const double* a, const double* b, std::size_t k);
  // Sum of (a[i] - b[i])^2.
  double (*squared_distance)(const double* a, const double* b, std::size_t k);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t k);
  // Regularized SGD step on one latent vector:
  //   out[i] = w[i] + data_step * other[i]
  //            - reg_step * ((w[i] - anchor_a[i]) + (w[i] - anchor_b[i]))
  // anchor_b may be null, in which case its term is dropped. `out` may alias `w`.
  void (*sgd_step)(double* out, const double* w, const double* other, double data_step, const double* anchor_a,
                   const double* anchor_b, double reg_step, std::size_t k);
};

const KernelSet& scalar();
// Null when the backend was not compiled in or the CPU lacks the instructions.
const KernelSet* avx2();
const KernelSet* neon();

/// Backends usable on this machine, scalar first.
std::vector<const KernelSet*> available();

/// Kernel set used by the library. Chosen once on first use: the HPMF_KERNEL
/// environment variable ("scalar", "avx2", "neon") if set, otherwise the
/// widest available backend.
const KernelSet& active();

// Overrides the active backend; returns false for unknown or unavailable names.
bool select(std::string_view name);

}  // namespace hpmf::kernels
