#include <cmath>
#include <string>

#include "hpmf/error.hpp"
#include "hpmf/factorization.hpp"
#include "hpmf/kernels.hpp"

namespace hpmf {

FactorSet sample_factors(const TaxonomyTree& tree, std::size_t n_cols, std::size_t k, double sigma_u, double sigma_v,
                         Rng& rng) {
  if (!(sigma_u >= 0.0) || !(sigma_v >= 0.0)) fail(ErrorCode::InvalidArgument, "factor spreads must be >= 0");
  if (k < 1) fail(ErrorCode::InvalidArgument, "k must be >= 1");
  std::normal_distribution<double> normal(0.0, 1.0);
  FactorSet f = FactorSet::zeros(tree, n_cols, k);
  for (double& x : f.U[0].values()) x = normal(rng);
  // v^(0) is one vector shared by every column.
  std::vector<double> v0(k);
  for (double& x : v0) x = normal(rng);
  for (std::size_t m = 0; m < n_cols; ++m) std::copy(v0.begin(), v0.end(), f.V[0].vec(m));

  for (int l = 1; l <= tree.depth(); ++l) {
    auto& U = f.U[l];
    for (std::size_t n = 0; n < U.rows(); ++n) {
      const double* p = l == 1 ? f.U[0].vec(0) : f.U[l - 1].vec(tree.parent(l, n));
      double* u = U.vec(n);
      for (std::size_t i = 0; i < k; ++i) u[i] = p[i] + sigma_u * normal(rng);
    }
    auto& V = f.V[l];
    for (std::size_t m = 0; m < n_cols; ++m) {
      const double* prev = f.V[l - 1].vec(m);
      double* v = V.vec(m);
      for (std::size_t i = 0; i < k; ++i) v[i] = prev[i] + sigma_v * normal(rng);
    }
  }
  return f;
}

SparseTraitMatrix sample_observations(int level, const FactorSet& truth, double sigma, double missing_rate,
                                      Rng& mask_rng, Rng& noise_rng) {
  if (!(missing_rate >= 0.0 && missing_rate < 1.0)) {
    fail(ErrorCode::BadRate, "missing rate " + std::to_string(missing_rate) + " outside [0, 1)");
  }
  if (!(sigma >= 0.0)) fail(ErrorCode::InvalidArgument, "noise level must be >= 0");
  if (level < 1 || level > truth.depth()) fail(ErrorCode::IndexOutOfRange, "level " + std::to_string(level));
  const auto& kern = kernels::active();
  const auto& U = truth.U[level];
  const auto& V = truth.V[level];
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<TraitEntry> entries;
  for (std::size_t n = 0; n < U.rows(); ++n) {
    for (std::size_t m = 0; m < V.rows(); ++m) {
      if (unit(mask_rng) < missing_rate) continue;
      entries.push_back({n, m, kern.dot(U.vec(n), V.vec(m), truth.k) + sigma * normal(noise_rng)});
    }
  }
  return SparseTraitMatrix(level, U.rows(), V.rows(), std::move(entries));
}

SyntheticData generate_synthetic(const TaxonomyTree& tree, const SyntheticParams& p) {
  const int L = tree.depth();
  if (p.missing_rate.size() != static_cast<std::size_t>(L)) {
    fail(ErrorCode::BadRate, std::to_string(p.missing_rate.size()) + " missing rates for " + std::to_string(L) + " levels");
  }
  for (double r : p.missing_rate) {
    if (!(r >= 0.0 && r < 1.0)) fail(ErrorCode::BadRate, "missing rate " + std::to_string(r) + " outside [0, 1)");
  }
  if (!(p.sigma_u >= 0.0 && p.sigma_v >= 0.0 && p.sigma >= 0.0)) {
    fail(ErrorCode::InvalidArgument, "spreads must be >= 0");
  }
  Rng factor_rng = make_rng(p.seed, "synth_factors");
  Rng mask_rng = make_rng(p.seed, "synth_mask");
  Rng noise_rng = make_rng(p.seed, "synth_noise");
  SyntheticData out;
  out.truth = sample_factors(tree, p.n_cols, p.k, p.sigma_u, p.sigma_v, factor_rng);
  for (int l = 1; l <= L; ++l) {
    out.levels.push_back(sample_observations(l, out.truth, p.sigma, p.missing_rate[l - 1], mask_rng, noise_rng));
  }
  return out;
}

}  // namespace hpmf
