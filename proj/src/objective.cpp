#include <cmath>
#include <string>

#include "hpmf/error.hpp"
#include "hpmf/factorization.hpp"
#include "hpmf/kernels.hpp"

namespace hpmf {

FactorSet FactorSet::zeros(const TaxonomyTree& tree, std::size_t n_cols, std::size_t k) {
  FactorSet f;
  f.k = k;
  const int L = tree.depth();
  f.U.emplace_back(1, k);
  f.V.emplace_back(n_cols, k);
  for (int l = 1; l <= L; ++l) {
    f.U.emplace_back(tree.nodes_at(l), k);
    f.V.emplace_back(n_cols, k);
  }
  return f;
}

void check_dimensions(const FactorSet& f, std::span<const SparseTraitMatrix> data, const TaxonomyTree& tree,
                      bool leaf_only_ok) {
  const int L = tree.depth();
  auto mismatch = [](const std::string& what) { fail(ErrorCode::DimensionMismatch, what); };
  if (f.depth() != L || f.V.size() != f.U.size()) {
    mismatch("factor set has " + std::to_string(f.depth()) + " levels, tree has " + std::to_string(L));
  }
  const std::size_t M = f.n_cols();
  if (f.U[0].rows() != 1) mismatch("level-0 row prior must be a single vector");
  for (int l = 0; l <= L; ++l) {
    if (f.U[l].dim() != f.k || f.V[l].dim() != f.k) mismatch("latent dimension differs at level " + std::to_string(l));
    if (f.V[l].rows() != M) mismatch("column factor count differs at level " + std::to_string(l));
    if (l > 0 && f.U[l].rows() != tree.nodes_at(l)) {
      mismatch("level " + std::to_string(l) + " has " + std::to_string(f.U[l].rows()) + " row factors for " +
               std::to_string(tree.nodes_at(l)) + " nodes");
    }
  }
  const bool leaf_only = leaf_only_ok && data.size() == 1;
  if (!leaf_only && data.size() != static_cast<std::size_t>(L)) {
    mismatch(std::to_string(data.size()) + " data matrices for " + std::to_string(L) + " levels");
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int level = leaf_only ? L : static_cast<int>(i) + 1;
    if (data[i].n_rows() != tree.nodes_at(level) || data[i].n_cols() != M) {
      mismatch("data matrix for level " + std::to_string(level) + " is " + std::to_string(data[i].n_rows()) + "x" +
               std::to_string(data[i].n_cols()));
    }
  }
}

namespace {

const double* parent_vec(const FactorSet& f, const TaxonomyTree& tree, int level, std::size_t n) {
  return level == 1 ? f.U[0].vec(0) : f.U[level - 1].vec(tree.parent(level, n));
}

double data_term(const FactorSet& f, const SparseTraitMatrix& x, int level) {
  const auto& kern = kernels::active();
  const auto& U = f.U[level];
  const auto& V = f.V[level];
  double s = 0.0;
  for (const auto& e : x.entries()) {
    const double r = e.value - kern.dot(U.vec(e.row), V.vec(e.col), f.k);
    s += r * r;
  }
  return s;
}

// lambda_u * sum_n |u_n - u_p(n)|^2 + lambda_v * sum_m |v_m - v_m^(l-1)|^2
double upward_coupling(const FactorSet& f, const TaxonomyTree& tree, int level, const Hyperparams& h) {
  const auto& kern = kernels::active();
  double su = 0.0;
  for (std::size_t n = 0; n < f.U[level].rows(); ++n) {
    su += kern.squared_distance(f.U[level].vec(n), parent_vec(f, tree, level, n), f.k);
  }
  double sv = 0.0;
  for (std::size_t m = 0; m < f.V[level].rows(); ++m) {
    sv += kern.squared_distance(f.V[level].vec(m), f.V[level - 1].vec(m), f.k);
  }
  return h.lambda_u * su + h.lambda_v * sv;
}

void check_level_arg(int level, const TaxonomyTree& tree) {
  if (level < 1 || level > tree.depth()) fail(ErrorCode::IndexOutOfRange, "level " + std::to_string(level));
}

}  // namespace

double objective_full(const FactorSet& f, std::span<const SparseTraitMatrix> data, const TaxonomyTree& tree,
                      const Hyperparams& h) {
  check_dimensions(f, data, tree);
  double e = 0.0;
  for (int l = 1; l <= tree.depth(); ++l) e += data_term(f, data[l - 1], l) + upward_coupling(f, tree, l, h);
  return e;
}

double objective_hrpmf(const FactorSet& f, std::span<const SparseTraitMatrix> data, const TaxonomyTree& tree,
                       const Hyperparams& h) {
  check_dimensions(f, data, tree, true);
  const int L = tree.depth();
  double e = data_term(f, data.back(), L);
  for (int l = 1; l <= L; ++l) e += upward_coupling(f, tree, l, h);
  return e;
}

double objective_level(int level, const FactorSet& f, std::span<const SparseTraitMatrix> data,
                       const TaxonomyTree& tree, const Hyperparams& h, ChildCoupling coupling) {
  check_dimensions(f, data, tree);
  check_level_arg(level, tree);
  const auto& kern = kernels::active();
  const int L = tree.depth();
  double e = data_term(f, data[level - 1], level) + upward_coupling(f, tree, level, h);
  if (level < L) {
    double su = 0.0;
    for (std::size_t n = 0; n < f.U[level].rows(); ++n) {
      auto kids = tree.children(level, n);
      double s = 0.0;
      for (std::size_t c : kids) s += kern.squared_distance(f.U[level].vec(n), f.U[level + 1].vec(c), f.k);
      if (coupling == ChildCoupling::Mean && !kids.empty()) s /= static_cast<double>(kids.size());
      su += s;
    }
    double sv = 0.0;
    for (std::size_t m = 0; m < f.V[level].rows(); ++m) {
      sv += kern.squared_distance(f.V[level].vec(m), f.V[level + 1].vec(m), f.k);
    }
    e += h.lambda_u * su + h.lambda_v * sv;
  }
  return e;
}

namespace {

// Symmetric sparse matrix in CSR form, used for the coupling-graph Laplacians.
struct CsrMatrix {
  std::size_t n = 0;
  std::vector<std::size_t> ptr;
  std::vector<std::size_t> idx;
  std::vector<double> val;
};

struct Edge {
  std::size_t a;
  std::size_t b;
};

// L = D - W for an undirected graph whose edges carry weight `w` in each direction.
CsrMatrix laplacian(std::size_t n, const std::vector<Edge>& edges, double w) {
  std::vector<std::vector<std::pair<std::size_t, double>>> rows(n);
  std::vector<double> degree(n, 0.0);
  for (const auto& e : edges) {
    rows[e.a].emplace_back(e.b, -w);
    rows[e.b].emplace_back(e.a, -w);
    degree[e.a] += w;
    degree[e.b] += w;
  }
  CsrMatrix L;
  L.n = n;
  L.ptr.push_back(0);
  for (std::size_t i = 0; i < n; ++i) {
    L.idx.push_back(i);
    L.val.push_back(degree[i]);
    for (const auto& [j, v] : rows[i]) {
      L.idx.push_back(j);
      L.val.push_back(v);
    }
    L.ptr.push_back(L.idx.size());
  }
  return L;
}

// tr(F L F^T) with the columns of F given as the rows of `stacked` (n x k).
double laplacian_trace(const std::vector<double>& stacked, std::size_t k, const CsrMatrix& L) {
  const auto& kern = kernels::active();
  std::vector<double> fl(k);
  double tr = 0.0;
  for (std::size_t a = 0; a < L.n; ++a) {
    std::fill(fl.begin(), fl.end(), 0.0);
    for (std::size_t p = L.ptr[a]; p < L.ptr[a + 1]; ++p) kern.axpy(L.val[p], stacked.data() + L.idx[p] * k, fl.data(), k);
    tr += kern.dot(stacked.data() + a * k, fl.data(), k);
  }
  return tr;
}

}  // namespace

double objective_stacked(const FactorSet& f, std::span<const SparseTraitMatrix> data, const TaxonomyTree& tree,
                         const Hyperparams& h) {
  check_dimensions(f, data, tree);
  const auto& kern = kernels::active();
  const int L = tree.depth();
  const std::size_t k = f.k;
  const std::size_t M = f.n_cols();

  // Stacked row factors: u^(0) first, then levels 1..L in order.
  std::vector<std::size_t> row_offset(L + 1, 0);
  row_offset[0] = 0;
  std::size_t total_rows = 1;
  for (int l = 1; l <= L; ++l) {
    row_offset[l] = total_rows;
    total_rows += f.U[l].rows();
  }
  // Stacked column factors: the M level-0 priors, then levels 1..L.
  const std::size_t total_cols = M * (static_cast<std::size_t>(L) + 1);
  std::vector<double> u_stack(total_rows * k);
  std::vector<double> v_stack(total_cols * k);
  for (int l = 0; l <= L; ++l) {
    auto src = f.U[l].values();
    std::copy(src.begin(), src.end(), u_stack.begin() + static_cast<std::ptrdiff_t>(row_offset[l] * k));
    auto vsrc = f.V[l].values();
    std::copy(vsrc.begin(), vsrc.end(), v_stack.begin() + static_cast<std::ptrdiff_t>(M * l * k));
  }

  // Block-diagonal data: X^(l) occupies rows of level l and columns M(l-1)..Ml-1
  // of the stacked data matrix, whose column c pairs with stacked factor M + c.
  double loss = 0.0;
  for (int l = 1; l <= L; ++l) {
    for (const auto& e : data[l - 1].entries()) {
      const std::size_t r = row_offset[l] + e.row;
      const std::size_t c = M + M * (l - 1) + e.col;
      const double res = e.value - kern.dot(u_stack.data() + r * k, v_stack.data() + c * k, k);
      loss += res * res;
    }
  }

  std::vector<Edge> wu;
  for (int l = 1; l <= L; ++l) {
    for (std::size_t n = 0; n < f.U[l].rows(); ++n) {
      const std::size_t parent = l == 1 ? 0 : row_offset[l - 1] + tree.parent(l, n);
      wu.push_back({parent, row_offset[l] + n});
    }
  }
  std::vector<Edge> wv;
  for (int l = 1; l <= L; ++l) {
    for (std::size_t m = 0; m < M; ++m) wv.push_back({M * (l - 1) + m, M * l + m});
  }
  const CsrMatrix lu = laplacian(total_rows, wu, 0.5);
  const CsrMatrix lv = laplacian(total_cols, wv, 0.5);
  return loss + 2.0 * h.lambda_u * laplacian_trace(u_stack, k, lu) + 2.0 * h.lambda_v * laplacian_trace(v_stack, k, lv);
}

namespace {

LevelGradient gradient_impl(int level, const FactorSet& f, const SparseTraitMatrix* x, const TaxonomyTree& tree,
                            const Hyperparams& h, ChildCoupling coupling) {
  const auto& kern = kernels::active();
  const int L = tree.depth();
  const std::size_t k = f.k;
  const auto& U = f.U[level];
  const auto& V = f.V[level];
  LevelGradient g{FactorMatrix(U.rows(), k), FactorMatrix(V.rows(), k)};
  if (x) {
    for (const auto& e : x->entries()) {
      const double r = e.value - kern.dot(U.vec(e.row), V.vec(e.col), k);
      kern.axpy(-2.0 * r, V.vec(e.col), g.du.vec(e.row), k);
      kern.axpy(-2.0 * r, U.vec(e.row), g.dv.vec(e.col), k);
    }
  }
  for (std::size_t n = 0; n < U.rows(); ++n) {
    double* gu = g.du.vec(n);
    const double* u = U.vec(n);
    const double* p = parent_vec(f, tree, level, n);
    for (std::size_t i = 0; i < k; ++i) gu[i] += 2.0 * h.lambda_u * (u[i] - p[i]);
    if (level < L) {
      auto kids = tree.children(level, n);
      const double w = (coupling == ChildCoupling::Mean && !kids.empty()) ? 1.0 / static_cast<double>(kids.size()) : 1.0;
      for (std::size_t c : kids) {
        const double* uc = f.U[level + 1].vec(c);
        for (std::size_t i = 0; i < k; ++i) gu[i] += 2.0 * h.lambda_u * w * (u[i] - uc[i]);
      }
    }
  }
  for (std::size_t m = 0; m < V.rows(); ++m) {
    double* gv = g.dv.vec(m);
    const double* v = V.vec(m);
    const double* prev = f.V[level - 1].vec(m);
    for (std::size_t i = 0; i < k; ++i) gv[i] += 2.0 * h.lambda_v * (v[i] - prev[i]);
    if (level < L) {
      const double* next = f.V[level + 1].vec(m);
      for (std::size_t i = 0; i < k; ++i) gv[i] += 2.0 * h.lambda_v * (v[i] - next[i]);
    }
  }
  return g;
}

}  // namespace

LevelGradient gradient_level(int level, const FactorSet& f, std::span<const SparseTraitMatrix> data,
                             const TaxonomyTree& tree, const Hyperparams& h, ChildCoupling coupling) {
  check_dimensions(f, data, tree);
  check_level_arg(level, tree);
  return gradient_impl(level, f, &data[level - 1], tree, h, coupling);
}

LevelGradient gradient_hrpmf(int level, const FactorSet& f, std::span<const SparseTraitMatrix> data,
                             const TaxonomyTree& tree, const Hyperparams& h) {
  check_dimensions(f, data, tree, true);
  check_level_arg(level, tree);
  const SparseTraitMatrix* x = level == tree.depth() ? &data.back() : nullptr;
  return gradient_impl(level, f, x, tree, h, ChildCoupling::Sum);
}

double predict(const FactorSet& f, std::size_t row, std::size_t col) {
  const int L = f.depth();
  if (L < 1 || row >= f.U[L].rows() || col >= f.V[L].rows()) {
    fail(ErrorCode::IndexOutOfRange, "cell (" + std::to_string(row) + ", " + std::to_string(col) + ")");
  }
  return kernels::active().dot(f.U[L].vec(row), f.V[L].vec(col), f.k);
}

double leaf_rmse(const FactorSet& f, const SparseTraitMatrix& m) {
  if (m.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (const auto& e : m.entries()) {
    const double r = e.value - predict(f, e.row, e.col);
    s += r * r;
  }
  return std::sqrt(s / static_cast<double>(m.size()));
}

}  // namespace hpmf
