#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "hpmf/taxonomy.hpp"
#include "hpmf/trait_data.hpp"

namespace hpmf {

/// Group means of training leaf values for every ancestor level 1..L-1 plus a
/// global per-column mean (level 0). A cell with count 0 has no mean.
class MeanTables {
 public:
  struct Cell {
    double mean = 0.0;
    std::size_t count = 0;
  };

  MeanTables() = default;
  MeanTables(std::size_t n_cols, std::vector<std::size_t> nodes_per_level);

  std::size_t n_cols() const noexcept { return n_cols_; }
  // Deepest ancestor level stored (L-1).
  int max_level() const noexcept { return static_cast<int>(cells_.size()) - 1; }
  std::size_t nodes_at(int level) const { return cells_.at(level).size() / n_cols_; }

  // Level 0 ignores `node`.
  const Cell& at(int level, std::size_t node, std::size_t col) const;
  Cell& at(int level, std::size_t node, std::size_t col);

  std::optional<double> mean(int level, std::size_t node, std::size_t col) const;

 private:
  std::size_t n_cols_ = 0;
  std::vector<std::vector<Cell>> cells_;
};

MeanTables build_mean_tables(const SparseTraitMatrix& train, const TaxonomyTree& tree);

struct MeanPrediction {
  double value = 0.0;
  // Ancestor level the mean came from; 0 is the global column mean.
  int level_used = 0;
};

/// Walks from ancestor level `max_level` up to level 1 and returns the first
/// available group mean, falling back to the global column mean. Empty when
/// the column has no training data at all.
std::optional<MeanPrediction> mean_predict(const MeanTables& tables, const TaxonomyTree& tree, std::size_t leaf,
                                           std::size_t col, int max_level);

}  // namespace hpmf
