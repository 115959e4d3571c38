#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <string>

#include "hpmf/error.hpp"
#include "hpmf/factorization.hpp"
#include "hpmf/kernels.hpp"

namespace hpmf {

void Hyperparams::validate() const {
  auto bad = [](const std::string& what) { fail(ErrorCode::InvalidArgument, what); };
  if (k < 1) bad("k must be >= 1");
  if (!(lambda_u >= 0.0) || !(lambda_v >= 0.0)) bad("regularization weights must be >= 0");
  if (!(learning_rate > 0.0)) bad("learning rate must be > 0");
  if (epochs_per_level < 1) bad("epochs per level must be >= 1");
  if (max_passes < 1) bad("max passes must be >= 1");
  if (patience < 1) bad("patience must be >= 1");
  if (!(init_scale > 0.0)) bad("init scale must be > 0");
}

std::string_view to_string(SweepDirection d) { return d == SweepDirection::TopDown ? "top-down" : "bottom-up"; }
std::string_view to_string(StopReason r) { return r == StopReason::EarlyStop ? "early_stop" : "max_passes"; }

namespace {

bool same_bits(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }

}  // namespace

bool identical(const TrainTrace& a, const TrainTrace& b) {
  if (a.stop_reason != b.stop_reason || a.best_pass != b.best_pass) return false;
  if (a.steps.size() != b.steps.size() || a.passes.size() != b.passes.size()) return false;
  for (std::size_t i = 0; i < a.steps.size(); ++i) {
    const auto& x = a.steps[i];
    const auto& y = b.steps[i];
    if (x.pass != y.pass || x.direction != y.direction || x.level != y.level || !same_bits(x.objective, y.objective) ||
        !same_bits(x.validation_rmse, y.validation_rmse)) {
      return false;
    }
  }
  for (std::size_t i = 0; i < a.passes.size(); ++i) {
    const auto& x = a.passes[i];
    const auto& y = b.passes[i];
    if (x.pass != y.pass || !same_bits(x.objective, y.objective) || !same_bits(x.validation_rmse, y.validation_rmse)) {
      return false;
    }
  }
  return true;
}

bool EarlyStopping::record(int pass, double rmse) {
  if (rmse < best_) {
    best_ = rmse;
    best_pass_ = pass;
    since_best_ = 0;
    return true;
  }
  ++since_best_;
  return false;
}

namespace {

const SparseTraitMatrix& level_matrix(std::span<const SparseTraitMatrix> data, const TaxonomyTree& tree, int level) {
  if (level < 1 || level > tree.depth()) fail(ErrorCode::IndexOutOfRange, "level " + std::to_string(level));
  if (data.size() == static_cast<std::size_t>(tree.depth())) return data[level - 1];
  if (data.size() == 1 && level == tree.depth()) return data.back();
  fail(ErrorCode::DimensionMismatch, "no data matrix for level " + std::to_string(level));
}

// Regularization anchors of one level for the duration of an epoch. Other
// levels are frozen while this level is updated, so the child means can be
// computed once.
struct Anchors {
  std::vector<const double*> row_a;
  FactorMatrix child_mean;
  bool has_children = false;
  std::vector<double> zero;

  const double* row_b(std::size_t n) const { return has_children ? child_mean.vec(n) : nullptr; }
};

Anchors make_anchors(int level, const FactorSet& f, const TaxonomyTree& tree, Prior prior) {
  Anchors a;
  const std::size_t k = f.k;
  const std::size_t N = f.U[level].rows();
  a.zero.assign(k, 0.0);
  a.row_a.resize(N);
  if (prior == Prior::Zero) {
    std::fill(a.row_a.begin(), a.row_a.end(), a.zero.data());
    return a;
  }
  for (std::size_t n = 0; n < N; ++n) {
    a.row_a[n] = level == 1 ? f.U[0].vec(0) : f.U[level - 1].vec(tree.parent(level, n));
  }
  if (level < tree.depth()) {
    a.has_children = true;
    a.child_mean = FactorMatrix(N, k);
    const auto& kern = kernels::active();
    for (std::size_t n = 0; n < N; ++n) {
      auto kids = tree.children(level, n);
      double* mean = a.child_mean.vec(n);
      for (std::size_t c : kids) kern.axpy(1.0, f.U[level + 1].vec(c), mean, k);
      const double inv = 1.0 / static_cast<double>(kids.size());
      for (std::size_t i = 0; i < k; ++i) mean[i] *= inv;
    }
  }
  return a;
}

void require_finite(const FactorMatrix& m, int level, char side) {
  for (double x : m.values()) {
    if (!std::isfinite(x)) {
      fail(ErrorCode::NonFiniteUpdate, std::string("non-finite ") + side + " factor at level " + std::to_string(level) +
                                           "; lower the learning rate or raise regularization");
    }
  }
}

}  // namespace

void sgd_epoch_level(int level, FactorSet& f, std::span<const SparseTraitMatrix> data, const TaxonomyTree& tree,
                     const Hyperparams& h, Rng& rng, Prior prior) {
  const SparseTraitMatrix& x = level_matrix(data, tree, level);
  if (x.empty()) return;
  const auto& kern = kernels::active();
  const std::size_t k = f.k;
  const int L = tree.depth();
  const bool downward = prior == Prior::Hierarchical && level < L;
  const Anchors anchors = make_anchors(level, f, tree, prior);

  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  auto& U = f.U[level];
  auto& V = f.V[level];
  const double eta = h.learning_rate;
  std::vector<double> u_old(k);
  auto entries = x.entries();
  for (std::size_t idx : order) {
    const TraitEntry& e = entries[idx];
    double* u = U.vec(e.row);
    double* v = V.vec(e.col);
    const double err = e.value - kern.dot(u, v, k);
    if (!std::isfinite(err)) {
      fail(ErrorCode::NonFiniteUpdate, "residual diverged at level " + std::to_string(level) + ", entry (" +
                                           std::to_string(e.row) + ", " + std::to_string(e.col) + ")");
    }
    const double du = static_cast<double>(x.row_count(e.row));
    const double dv = static_cast<double>(x.col_count(e.col));
    std::copy(u, u + k, u_old.begin());
    kern.sgd_step(u, u, v, eta * err, anchors.row_a[e.row], anchors.row_b(e.row), eta * h.lambda_u / du, k);
    const double* v_prev = prior == Prior::Zero ? anchors.zero.data() : f.V[level - 1].vec(e.col);
    const double* v_next = downward ? f.V[level + 1].vec(e.col) : nullptr;
    kern.sgd_step(v, v, u_old.data(), eta * err, v_prev, v_next, eta * h.lambda_v / dv, k);
  }
  require_finite(U, level, 'U');
  require_finite(V, level, 'V');
}

LevelGradient sgd_batch_direction(int level, const FactorSet& f, std::span<const SparseTraitMatrix> data,
                                  const TaxonomyTree& tree, const Hyperparams& h, Prior prior) {
  const SparseTraitMatrix& x = level_matrix(data, tree, level);
  const auto& kern = kernels::active();
  const std::size_t k = f.k;
  const bool downward = prior == Prior::Hierarchical && level < tree.depth();
  const Anchors anchors = make_anchors(level, f, tree, prior);
  const auto& U = f.U[level];
  const auto& V = f.V[level];
  LevelGradient d{FactorMatrix(U.rows(), k), FactorMatrix(V.rows(), k)};
  for (const auto& e : x.entries()) {
    const double* u = U.vec(e.row);
    const double* v = V.vec(e.col);
    const double err = e.value - kern.dot(u, v, k);
    const double du = static_cast<double>(x.row_count(e.row));
    const double dv = static_cast<double>(x.col_count(e.col));
    // Per-entry step with unit learning rate, accumulated relative to the frozen point.
    std::vector<double> step(k);
    kern.sgd_step(step.data(), u, v, err, anchors.row_a[e.row], anchors.row_b(e.row), h.lambda_u / du, k);
    for (std::size_t i = 0; i < k; ++i) d.du.vec(e.row)[i] += step[i] - u[i];
    const double* v_prev = prior == Prior::Zero ? anchors.zero.data() : f.V[level - 1].vec(e.col);
    const double* v_next = downward ? f.V[level + 1].vec(e.col) : nullptr;
    kern.sgd_step(step.data(), v, u, err, v_prev, v_next, h.lambda_v / dv, k);
    for (std::size_t i = 0; i < k; ++i) d.dv.vec(e.col)[i] += step[i] - v[i];
  }
  return d;
}

void hrpmf_block_update(int level, FactorSet& f, const TaxonomyTree& tree) {
  const int L = tree.depth();
  if (level < 1 || level >= L) fail(ErrorCode::IndexOutOfRange, "block update needs a data-free level below the leaves");
  const auto& kern = kernels::active();
  const std::size_t k = f.k;
  auto& U = f.U[level];
  for (std::size_t n = 0; n < U.rows(); ++n) {
    const double* p = level == 1 ? f.U[0].vec(0) : f.U[level - 1].vec(tree.parent(level, n));
    auto kids = tree.children(level, n);
    double* u = U.vec(n);
    std::copy(p, p + k, u);
    for (std::size_t c : kids) kern.axpy(1.0, f.U[level + 1].vec(c), u, k);
    const double inv = 1.0 / static_cast<double>(kids.size() + 1);
    for (std::size_t i = 0; i < k; ++i) u[i] *= inv;
  }
  auto& V = f.V[level];
  for (std::size_t m = 0; m < V.rows(); ++m) {
    const double* prev = f.V[level - 1].vec(m);
    const double* next = f.V[level + 1].vec(m);
    double* v = V.vec(m);
    for (std::size_t i = 0; i < k; ++i) v[i] = 0.5 * (prev[i] + next[i]);
  }
}

namespace {

enum class Method { Hpmf, Hrpmf, Lpmf };

double objective_lpmf(const FactorSet& f, std::span<const SparseTraitMatrix> data, const Hyperparams& h) {
  const auto& kern = kernels::active();
  double e = 0.0;
  for (int l = 1; l <= f.depth(); ++l) {
    for (const auto& x : data[l - 1].entries()) {
      const double r = x.value - kern.dot(f.U[l].vec(x.row), f.V[l].vec(x.col), f.k);
      e += r * r;
    }
    for (std::size_t n = 0; n < f.U[l].rows(); ++n) e += h.lambda_u * kern.dot(f.U[l].vec(n), f.U[l].vec(n), f.k);
    for (std::size_t m = 0; m < f.V[l].rows(); ++m) e += h.lambda_v * kern.dot(f.V[l].vec(m), f.V[l].vec(m), f.k);
  }
  return e;
}

// Warm start of one level before its per-level PMF run.
void lpmf_initialize(int level, SweepDirection dir, FactorSet& f, const TaxonomyTree& tree) {
  const int L = tree.depth();
  const std::size_t k = f.k;
  auto& U = f.U[level];
  auto& V = f.V[level];
  if (dir == SweepDirection::TopDown) {
    // Level 1 sits under the zero root prior; it keeps its symmetry-breaking
    // random start on the first pass and its own factors afterwards.
    if (level == 1) return;
    for (std::size_t n = 0; n < U.rows(); ++n) {
      const double* p = f.U[level - 1].vec(tree.parent(level, n));
      std::copy(p, p + k, U.vec(n));
    }
    V = f.V[level - 1];
    return;
  }
  if (level == L) return;
  const auto& kern = kernels::active();
  for (std::size_t n = 0; n < U.rows(); ++n) {
    auto kids = tree.children(level, n);
    double* u = U.vec(n);
    std::fill(u, u + k, 0.0);
    for (std::size_t c : kids) kern.axpy(1.0, f.U[level + 1].vec(c), u, k);
    const double inv = 1.0 / static_cast<double>(kids.size());
    for (std::size_t i = 0; i < k; ++i) u[i] *= inv;
  }
  V = f.V[level + 1];
}

TrainResult run_training(Method method, std::span<const SparseTraitMatrix> data, const SparseTraitMatrix& validation,
                         const TaxonomyTree& tree, const Hyperparams& h) {
  h.validate();
  if (data.empty()) fail(ErrorCode::EmptyTrainingSet, "no data matrices");
  const SparseTraitMatrix& leaf = data.back();
  if (leaf.empty()) fail(ErrorCode::EmptyTrainingSet, "leaf-level training matrix has no entries");
  const int L = tree.depth();
  const std::size_t M = leaf.n_cols();

  FactorSet f = FactorSet::zeros(tree, M, h.k);
  check_dimensions(f, data, tree, method == Method::Hrpmf);
  if (validation.n_rows() != leaf.n_rows() || validation.n_cols() != M) {
    fail(ErrorCode::DimensionMismatch, "validation matrix shape differs from the leaf training matrix");
  }

  Rng init = make_rng(h.seed, "init");
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int l = 1; l <= L; ++l) {
    for (double& x : f.U[l].values()) x = h.init_scale * normal(init);
    for (double& x : f.V[l].values()) x = h.init_scale * normal(init);
  }
  Rng shuffle = make_rng(h.seed, "shuffle");

  auto objective = [&](const FactorSet& fs) {
    switch (method) {
      case Method::Hpmf: return objective_full(fs, data, tree, h);
      case Method::Hrpmf: return objective_hrpmf(fs, data, tree, h);
      case Method::Lpmf: return objective_lpmf(fs, data, h);
    }
    return 0.0;
  };

  auto update_level = [&](int level, SweepDirection dir) {
    if (method == Method::Hrpmf && level < L) {
      hrpmf_block_update(level, f, tree);
      return;
    }
    Prior prior = Prior::Hierarchical;
    if (method == Method::Lpmf) {
      lpmf_initialize(level, dir, f, tree);
      prior = Prior::Zero;
    }
    for (int e = 0; e < h.epochs_per_level; ++e) sgd_epoch_level(level, f, data, tree, h, shuffle, prior);
  };

  TrainTrace trace;
  EarlyStopping stopper(h.patience);
  FactorSet best = f;
  for (int pass = 1; pass <= h.max_passes; ++pass) {
    for (SweepDirection dir : {SweepDirection::TopDown, SweepDirection::BottomUp}) {
      for (int i = 0; i < L; ++i) {
        const int level = dir == SweepDirection::TopDown ? i + 1 : L - i;
        update_level(level, dir);
        trace.steps.push_back({pass, dir, level, objective(f), leaf_rmse(f, validation)});
      }
    }
    const double val = trace.steps.back().validation_rmse;
    trace.passes.push_back({pass, trace.steps.back().objective, val});
    if (validation.empty()) {
      best = f;
      trace.best_pass = pass;
      continue;
    }
    if (stopper.record(pass, val)) best = f;
    trace.best_pass = stopper.best_pass();
    if (stopper.should_stop()) {
      trace.stop_reason = StopReason::EarlyStop;
      break;
    }
  }
  return {std::move(best), std::move(trace)};
}

}  // namespace

TrainResult train_hpmf(std::span<const SparseTraitMatrix> data, const SparseTraitMatrix& validation,
                       const TaxonomyTree& tree, const Hyperparams& h) {
  return run_training(Method::Hpmf, data, validation, tree, h);
}

TrainResult train_hrpmf(std::span<const SparseTraitMatrix> data, const SparseTraitMatrix& validation,
                        const TaxonomyTree& tree, const Hyperparams& h) {
  if (data.empty()) fail(ErrorCode::EmptyTrainingSet, "no data matrices");
  return run_training(Method::Hrpmf, data.last(1), validation, tree, h);
}

TrainResult train_lpmf(std::span<const SparseTraitMatrix> data, const SparseTraitMatrix& validation,
                       const TaxonomyTree& tree, const Hyperparams& h) {
  return run_training(Method::Lpmf, data, validation, tree, h);
}

TrainResult train_pmf(const SparseTraitMatrix& leaf, const SparseTraitMatrix& validation, const Hyperparams& h) {
  if (leaf.empty()) fail(ErrorCode::EmptyTrainingSet, "leaf-level training matrix has no entries");
  std::vector<LineageRecord> records(leaf.n_rows());
  for (std::size_t i = 0; i < records.size(); ++i) records[i].leaf = std::to_string(i);
  const TaxonomyTree flat = build_tree(records, {"leaf"});
  const SparseTraitMatrix data[] = {leaf.with_level(1)};
  return run_training(Method::Hpmf, data, validation, flat, h);
}

}  // namespace hpmf
