#include "hpmf/baseline.hpp"

#include <string>

#include "hpmf/error.hpp"

namespace hpmf {

MeanTables::MeanTables(std::size_t n_cols, std::vector<std::size_t> nodes_per_level) : n_cols_(n_cols) {
  cells_.resize(nodes_per_level.size());
  for (std::size_t l = 0; l < nodes_per_level.size(); ++l) cells_[l].resize(nodes_per_level[l] * n_cols);
}

const MeanTables::Cell& MeanTables::at(int level, std::size_t node, std::size_t col) const {
  if (level < 0 || level > max_level() || col >= n_cols_) {
    fail(ErrorCode::IndexOutOfRange, "mean table cell at level " + std::to_string(level));
  }
  if (level == 0) node = 0;
  const auto& cells = cells_[level];
  if (node * n_cols_ + col >= cells.size()) fail(ErrorCode::IndexOutOfRange, "node " + std::to_string(node));
  return cells[node * n_cols_ + col];
}

MeanTables::Cell& MeanTables::at(int level, std::size_t node, std::size_t col) {
  return const_cast<Cell&>(static_cast<const MeanTables&>(*this).at(level, node, col));
}

std::optional<double> MeanTables::mean(int level, std::size_t node, std::size_t col) const {
  const Cell& c = at(level, node, col);
  if (c.count == 0) return std::nullopt;
  return c.mean;
}

MeanTables build_mean_tables(const SparseTraitMatrix& train, const TaxonomyTree& tree) {
  const int L = tree.depth();
  if (train.n_rows() != tree.leaf_count()) {
    fail(ErrorCode::RowMismatch, "training rows do not match the tree's leaves");
  }
  std::vector<std::size_t> sizes{1};
  for (int l = 1; l < L; ++l) sizes.push_back(tree.nodes_at(l));
  MeanTables tables(train.n_cols(), sizes);
  // Accumulate sums in the mean slot, then divide.
  for (const auto& e : train.entries()) {
    for (int l = 0; l < L; ++l) {
      auto& cell = tables.at(l, l == 0 ? 0 : tree.ancestor(e.row, l), e.col);
      cell.mean += e.value;
      ++cell.count;
    }
  }
  for (int l = 0; l < L; ++l) {
    for (std::size_t n = 0; n < sizes[l]; ++n) {
      for (std::size_t c = 0; c < train.n_cols(); ++c) {
        auto& cell = tables.at(l, n, c);
        if (cell.count > 0) cell.mean /= static_cast<double>(cell.count);
      }
    }
  }
  return tables;
}

std::optional<MeanPrediction> mean_predict(const MeanTables& tables, const TaxonomyTree& tree, std::size_t leaf,
                                           std::size_t col, int max_level) {
  if (max_level < 0 || max_level > tables.max_level() || max_level >= tree.depth()) {
    fail(ErrorCode::IndexOutOfRange, "max level " + std::to_string(max_level));
  }
  if (leaf >= tree.leaf_count() || col >= tables.n_cols()) {
    fail(ErrorCode::IndexOutOfRange, "cell (" + std::to_string(leaf) + ", " + std::to_string(col) + ")");
  }
  for (int l = max_level; l >= 1; --l) {
    if (auto m = tables.mean(l, tree.ancestor(leaf, l), col)) return MeanPrediction{*m, l};
  }
  if (auto m = tables.mean(0, 0, col)) return MeanPrediction{*m, 0};
  return std::nullopt;
}

}  // namespace hpmf
