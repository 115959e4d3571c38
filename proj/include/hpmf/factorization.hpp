#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

#include "hpmf/rng.hpp"
#include "hpmf/taxonomy.hpp"
#include "hpmf/trait_data.hpp"

namespace hpmf {

struct Hyperparams {
  std::size_t k = 15;
  double lambda_u = 0.1;
  double lambda_v = 0.1;
  double learning_rate = 0.005;
  int epochs_per_level = 10;
  int max_passes = 5;
  int patience = 5;
  double init_scale = 0.01;
  std::uint64_t seed = 0;

  // Throws InvalidArgument.
  void validate() const;
};

/// `rows()` latent vectors of dimension `dim()`, stored contiguously.
class FactorMatrix {
 public:
  FactorMatrix() = default;
  FactorMatrix(std::size_t rows, std::size_t dim) : rows_(rows), dim_(dim), data_(rows * dim, 0.0) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t dim() const noexcept { return dim_; }

  double* vec(std::size_t i) noexcept { return data_.data() + i * dim_; }
  const double* vec(std::size_t i) const noexcept { return data_.data() + i * dim_; }
  std::span<double> operator[](std::size_t i) noexcept { return {vec(i), dim_}; }
  std::span<const double> operator[](std::size_t i) const noexcept { return {vec(i), dim_}; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  friend bool operator==(const FactorMatrix&, const FactorMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

/// Row factors U and column factors V for levels 0..L. Level 0 holds the
/// root prior: one vector in U, and the per-column prior v^(0) in V.
struct FactorSet {
  std::size_t k = 0;
  std::vector<FactorMatrix> U;
  std::vector<FactorMatrix> V;

  int depth() const noexcept { return static_cast<int>(U.size()) - 1; }
  std::size_t n_cols() const noexcept { return V.empty() ? 0 : V.front().rows(); }

  static FactorSet zeros(const TaxonomyTree& tree, std::size_t n_cols, std::size_t k);

  friend bool operator==(const FactorSet&, const FactorSet&) = default;
};

// Throws DimensionMismatch when factors, data and tree disagree. `data` holds
// levels 1..L, or only the leaf level when `leaf_only_ok` is set.
void check_dimensions(const FactorSet& f, std::span<const SparseTraitMatrix> data, const TaxonomyTree& tree,
                      bool leaf_only_ok = false);

// ---------------------------------------------------------------------------
// Objectives. `data[l-1]` is the level-l matrix.

/// Regularized squared loss summed over all levels, with u^(0), v^(0) as the
/// priors of level 1.
double objective_full(const FactorSet& f, std::span<const SparseTraitMatrix> data, const TaxonomyTree& tree,
                      const Hyperparams& h);

/// How the downward coupling of a node to its children is weighted in the
/// per-level objective. `Sum` is the plain objective; `Mean` divides by the
/// child count, which is what the SGD schedule optimizes.
enum class ChildCoupling { Sum, Mean };

/// Every term of the total objective that involves level `level`.
double objective_level(int level, const FactorSet& f, std::span<const SparseTraitMatrix> data,
                       const TaxonomyTree& tree, const Hyperparams& h, ChildCoupling coupling = ChildCoupling::Sum);

/// The total objective assembled from the diagonally stacked data matrix and
/// the graph Laplacians of the row and column coupling graphs. Edges carry
/// weight 1/2 in each direction so that 2*lambda*tr(F L F^T) equals lambda
/// times the sum of squared edge differences.
double objective_stacked(const FactorSet& f, std::span<const SparseTraitMatrix> data, const TaxonomyTree& tree,
                         const Hyperparams& h);

/// Leaf data term plus the full regularizer chain; upper-level data is ignored.
double objective_hrpmf(const FactorSet& f, std::span<const SparseTraitMatrix> data, const TaxonomyTree& tree,
                       const Hyperparams& h);

struct LevelGradient {
  FactorMatrix du;
  FactorMatrix dv;
};

/// Analytic gradient of objective_level with respect to U^(level), V^(level).
LevelGradient gradient_level(int level, const FactorSet& f, std::span<const SparseTraitMatrix> data,
                             const TaxonomyTree& tree, const Hyperparams& h,
                             ChildCoupling coupling = ChildCoupling::Sum);

/// Analytic gradient of objective_hrpmf with respect to U^(level), V^(level).
LevelGradient gradient_hrpmf(int level, const FactorSet& f, std::span<const SparseTraitMatrix> data,
                             const TaxonomyTree& tree, const Hyperparams& h);

// ---------------------------------------------------------------------------
// SGD

enum class Prior {
  // Couple to parent/previous level and, below the leaves, to children/next level.
  Hierarchical,
  // Ridge toward zero at every level; the hierarchy is ignored.
  Zero,
};

/// One pass over the observed entries of X^(level) in a seeded random order.
/// Only U^(level) and V^(level) change. Throws NonFiniteUpdate on divergence.
void sgd_epoch_level(int level, FactorSet& f, std::span<const SparseTraitMatrix> data, const TaxonomyTree& tree,
                     const Hyperparams& h, Rng& rng, Prior prior = Prior::Hierarchical);

/// Sum of the per-entry SGD update directions of one epoch with the factors
/// frozen (the epoch's update divided by the learning rate, in the limit of a
/// vanishing step).
LevelGradient sgd_batch_direction(int level, const FactorSet& f, std::span<const SparseTraitMatrix> data,
                                  const TaxonomyTree& tree, const Hyperparams& h, Prior prior = Prior::Hierarchical);

/// Exact minimization of the hierarchy-regularized objective over one
/// data-free level: each vector moves to the mean of its graph neighbours.
void hrpmf_block_update(int level, FactorSet& f, const TaxonomyTree& tree);

// ---------------------------------------------------------------------------
// Training

enum class SweepDirection { TopDown, BottomUp };
enum class StopReason { EarlyStop, MaxPasses };

std::string_view to_string(SweepDirection d);
std::string_view to_string(StopReason r);

struct TraceStep {
  int pass = 0;
  SweepDirection direction = SweepDirection::TopDown;
  int level = 0;
  double objective = 0.0;
  double validation_rmse = std::numeric_limits<double>::quiet_NaN();
};

struct PassSummary {
  int pass = 0;
  double objective = 0.0;
  double validation_rmse = std::numeric_limits<double>::quiet_NaN();
};

struct TrainTrace {
  std::vector<TraceStep> steps;
  std::vector<PassSummary> passes;
  StopReason stop_reason = StopReason::MaxPasses;
  int best_pass = 0;
};

// Bitwise comparison (NaN compares equal to an identical NaN).
bool identical(const TrainTrace& a, const TrainTrace& b);

/// Tracks the best validation score; stop once `patience` consecutive
/// evaluations fail to improve on it.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {}

  // Returns true when `rmse` is a new best.
  bool record(int pass, double rmse);
  bool should_stop() const noexcept { return since_best_ >= patience_; }
  int best_pass() const noexcept { return best_pass_; }
  double best() const noexcept { return best_; }

 private:
  int patience_;
  int best_pass_ = 0;
  int since_best_ = 0;
  double best_ = std::numeric_limits<double>::infinity();
};

struct TrainResult {
  FactorSet factors;
  TrainTrace trace;
};

/// Hierarchical PMF: stochastic block coordinate descent, top-down then
/// bottom-up sweeps, early stopping on leaf-level validation RMSE.
TrainResult train_hpmf(std::span<const SparseTraitMatrix> data, const SparseTraitMatrix& validation,
                       const TaxonomyTree& tree, const Hyperparams& h);

/// Hierarchy-regularized PMF. Only the leaf matrix (the last element of
/// `data`) is used.
TrainResult train_hrpmf(std::span<const SparseTraitMatrix> data, const SparseTraitMatrix& validation,
                        const TaxonomyTree& tree, const Hyperparams& h);

/// Level-wise PMF chained through initialization.
TrainResult train_lpmf(std::span<const SparseTraitMatrix> data, const SparseTraitMatrix& validation,
                       const TaxonomyTree& tree, const Hyperparams& h);

/// Flat PMF on the leaf matrix.
TrainResult train_pmf(const SparseTraitMatrix& leaf, const SparseTraitMatrix& validation, const Hyperparams& h);

/// Inner product of the leaf-level row and column factors.
double predict(const FactorSet& f, std::size_t row, std::size_t col);

// Sqrt of the mean squared residual of `f` over the entries of `m`; NaN when empty.
double leaf_rmse(const FactorSet& f, const SparseTraitMatrix& m);

// ---------------------------------------------------------------------------
// Generative sampler

struct SyntheticParams {
  std::size_t n_cols = 17;
  std::size_t k = 5;
  double sigma_u = 0.3;
  double sigma_v = 0.3;
  double sigma = 0.1;
  // One rate per level 1..L.
  std::vector<double> missing_rate;
  std::uint64_t seed = 0;
};

struct SyntheticData {
  std::vector<SparseTraitMatrix> levels;
  FactorSet truth;
};

/// u^(0), v^(0) standard normal; each level's vectors drawn around their
/// parent (rows) or previous-level counterpart (columns).
FactorSet sample_factors(const TaxonomyTree& tree, std::size_t n_cols, std::size_t k, double sigma_u, double sigma_v,
                         Rng& rng);

/// Observations of one level: each cell kept with probability 1 - missing_rate,
/// valued <u, v> plus N(0, sigma^2) noise.
SparseTraitMatrix sample_observations(int level, const FactorSet& truth, double sigma, double missing_rate,
                                      Rng& mask_rng, Rng& noise_rng);

// Throws BadRate.
SyntheticData generate_synthetic(const TaxonomyTree& tree, const SyntheticParams& p);

}  // namespace hpmf
