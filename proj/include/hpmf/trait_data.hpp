#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "hpmf/taxonomy.hpp"

namespace hpmf {

struct TraitEntry {
  std::size_t row;
  std::size_t col;
  double value;

  friend bool operator==(const TraitEntry&, const TraitEntry&) = default;
};

/// Observed entries of one hierarchy level. Entries are kept sorted by
/// (row, col), so each row is a contiguous slice; columns are indexed
/// separately.
class SparseTraitMatrix {
 public:
  SparseTraitMatrix() = default;
  // Throws IndexOutOfRange or DuplicateEntry.
  SparseTraitMatrix(int level, std::size_t n_rows, std::size_t n_cols, std::vector<TraitEntry> entries);

  int level() const noexcept { return level_; }
  std::size_t n_rows() const noexcept { return n_rows_; }
  std::size_t n_cols() const noexcept { return n_cols_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  std::span<const TraitEntry> entries() const noexcept { return entries_; }
  std::span<const TraitEntry> row(std::size_t r) const;
  // Positions into entries() of column c, ascending by row.
  std::span<const std::size_t> col(std::size_t c) const;
  std::size_t row_count(std::size_t r) const { return row(r).size(); }
  std::size_t col_count(std::size_t c) const { return col(c).size(); }

  std::optional<double> find(std::size_t r, std::size_t c) const;

  /// Same sparsity pattern, new values (one per entry, in entries() order).
  SparseTraitMatrix with_values(std::span<const double> values) const;
  SparseTraitMatrix with_level(int level) const;

  friend bool operator==(const SparseTraitMatrix& a, const SparseTraitMatrix& b) {
    return a.level_ == b.level_ && a.n_rows_ == b.n_rows_ && a.n_cols_ == b.n_cols_ && a.entries_ == b.entries_;
  }

 private:
  void index();

  int level_ = 1;
  std::size_t n_rows_ = 0;
  std::size_t n_cols_ = 0;
  std::vector<TraitEntry> entries_;
  std::vector<std::size_t> row_ptr_;
  std::vector<std::size_t> col_ptr_;
  std::vector<std::size_t> col_pos_;
};

/// Union of two matrices with the same shape; throws DuplicateEntry on overlap.
SparseTraitMatrix merge(const SparseTraitMatrix& a, const SparseTraitMatrix& b);

enum class StdConvention { Sample, Population };

/// Per-column mean and standard deviation of log values.
struct TraitStats {
  std::vector<double> lm;
  std::vector<double> ls;
  // Column had at least one entry when the stats were computed.
  std::vector<bool> present;
  // Column had one value or zero variance; such columns cannot be transformed.
  std::vector<bool> degenerate;
  StdConvention convention = StdConvention::Sample;

  std::size_t n_cols() const noexcept { return lm.size(); }
  bool usable(std::size_t c) const { return c < lm.size() && present[c] && !degenerate[c]; }
};

// Throws NonPositiveValue. Degenerate columns are flagged, not rejected.
TraitStats compute_stats(const SparseTraitMatrix& raw, StdConvention convention = StdConvention::Sample);

// z = (log x - lm) / ls. Throws NonPositiveValue, MissingStats or DegenerateColumn.
SparseTraitMatrix apply_transform(const SparseTraitMatrix& raw, const TraitStats& stats);

/// Log/z-score transform with stats computed from `raw` itself.
struct Transformed {
  SparseTraitMatrix matrix;
  TraitStats stats;
};
Transformed transform(const SparseTraitMatrix& raw, StdConvention convention = StdConvention::Sample);

double inverse_value(double z, const TraitStats& stats, std::size_t col);
SparseTraitMatrix inverse_transform(const SparseTraitMatrix& z, const TraitStats& stats);

/// Drops entries whose column has no usable stats; returns the kept matrix.
SparseTraitMatrix keep_transformable(const SparseTraitMatrix& m, const TraitStats& stats);

/// Matrices for levels 1..L (index 0 holds level 1). Upper entries are the mean
/// of all observed descendant leaf values in that column.
std::vector<SparseTraitMatrix> aggregate_levels(const SparseTraitMatrix& leaf, const TaxonomyTree& tree);

struct SplitBundle {
  SparseTraitMatrix train;
  SparseTraitMatrix validation;
  SparseTraitMatrix test;
  std::uint64_t seed = 0;
};

/// Per row: >=3 entries -> one test, one validation, rest train; 2 -> one
/// train, one test; 1 -> train.
SplitBundle split_per_plant(const SparseTraitMatrix& leaf, std::uint64_t seed);

struct SplitFractions {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
};

/// Seeded shuffle of all entries into contiguous blocks. Train gets
/// floor(train * S) entries; the remainder is divided between validation
/// (floor of its proportional share) and test.
SplitBundle split_random(const SparseTraitMatrix& leaf, SplitFractions fractions, std::uint64_t seed);

}  // namespace hpmf
