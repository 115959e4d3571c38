#include "hpmf/trait_data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <unordered_map>

#include "hpmf/error.hpp"
#include "hpmf/rng.hpp"

namespace hpmf {

SparseTraitMatrix::SparseTraitMatrix(int level, std::size_t n_rows, std::size_t n_cols, std::vector<TraitEntry> entries)
    : level_(level), n_rows_(n_rows), n_cols_(n_cols), entries_(std::move(entries)) {
  for (const auto& e : entries_) {
    if (e.row >= n_rows_ || e.col >= n_cols_) {
      fail(ErrorCode::IndexOutOfRange, "entry (" + std::to_string(e.row) + ", " + std::to_string(e.col) +
                                           ") outside " + std::to_string(n_rows_) + "x" + std::to_string(n_cols_));
    }
  }
  std::sort(entries_.begin(), entries_.end(),
            [](const TraitEntry& a, const TraitEntry& b) { return a.row != b.row ? a.row < b.row : a.col < b.col; });
  for (std::size_t i = 1; i < entries_.size(); ++i) {
    if (entries_[i].row == entries_[i - 1].row && entries_[i].col == entries_[i - 1].col) {
      fail(ErrorCode::DuplicateEntry,
           "(" + std::to_string(entries_[i].row) + ", " + std::to_string(entries_[i].col) + ") observed twice");
    }
  }
  index();
}

void SparseTraitMatrix::index() {
  row_ptr_.assign(n_rows_ + 1, 0);
  col_ptr_.assign(n_cols_ + 1, 0);
  for (const auto& e : entries_) {
    ++row_ptr_[e.row + 1];
    ++col_ptr_[e.col + 1];
  }
  std::partial_sum(row_ptr_.begin(), row_ptr_.end(), row_ptr_.begin());
  std::partial_sum(col_ptr_.begin(), col_ptr_.end(), col_ptr_.begin());
  col_pos_.resize(entries_.size());
  std::vector<std::size_t> cursor(col_ptr_.begin(), col_ptr_.end() - 1);
  for (std::size_t i = 0; i < entries_.size(); ++i) col_pos_[cursor[entries_[i].col]++] = i;
}

std::span<const TraitEntry> SparseTraitMatrix::row(std::size_t r) const {
  if (r >= n_rows_) fail(ErrorCode::IndexOutOfRange, "row " + std::to_string(r));
  return std::span<const TraitEntry>(entries_.data() + row_ptr_[r], row_ptr_[r + 1] - row_ptr_[r]);
}

std::span<const std::size_t> SparseTraitMatrix::col(std::size_t c) const {
  if (c >= n_cols_) fail(ErrorCode::IndexOutOfRange, "col " + std::to_string(c));
  return std::span<const std::size_t>(col_pos_.data() + col_ptr_[c], col_ptr_[c + 1] - col_ptr_[c]);
}

std::optional<double> SparseTraitMatrix::find(std::size_t r, std::size_t c) const {
  auto slice = row(r);
  auto it = std::lower_bound(slice.begin(), slice.end(), c, [](const TraitEntry& e, std::size_t v) { return e.col < v; });
  if (it != slice.end() && it->col == c) return it->value;
  return std::nullopt;
}

SparseTraitMatrix SparseTraitMatrix::with_values(std::span<const double> values) const {
  if (values.size() != entries_.size()) fail(ErrorCode::DimensionMismatch, "value count differs from entry count");
  SparseTraitMatrix out = *this;
  for (std::size_t i = 0; i < values.size(); ++i) out.entries_[i].value = values[i];
  return out;
}

SparseTraitMatrix SparseTraitMatrix::with_level(int level) const {
  SparseTraitMatrix out = *this;
  out.level_ = level;
  return out;
}

SparseTraitMatrix merge(const SparseTraitMatrix& a, const SparseTraitMatrix& b) {
  if (a.n_rows() != b.n_rows() || a.n_cols() != b.n_cols()) fail(ErrorCode::DimensionMismatch, "merge of unequal shapes");
  std::vector<TraitEntry> all(a.entries().begin(), a.entries().end());
  all.insert(all.end(), b.entries().begin(), b.entries().end());
  return SparseTraitMatrix(a.level(), a.n_rows(), a.n_cols(), std::move(all));
}

TraitStats compute_stats(const SparseTraitMatrix& raw, StdConvention convention) {
  const std::size_t M = raw.n_cols();
  TraitStats stats;
  stats.convention = convention;
  stats.lm.assign(M, 0.0);
  stats.ls.assign(M, 0.0);
  stats.present.assign(M, false);
  stats.degenerate.assign(M, false);
  for (std::size_t c = 0; c < M; ++c) {
    auto positions = raw.col(c);
    if (positions.empty()) continue;
    stats.present[c] = true;
    double sum = 0.0;
    for (std::size_t p : positions) {
      double x = raw.entries()[p].value;
      if (!(x > 0.0)) fail(ErrorCode::NonPositiveValue, "column " + std::to_string(c) + " has value " + std::to_string(x));
      sum += std::log(x);
    }
    const double n = static_cast<double>(positions.size());
    const double mean = sum / n;
    double ss = 0.0;
    for (std::size_t p : positions) {
      double d = std::log(raw.entries()[p].value) - mean;
      ss += d * d;
    }
    stats.lm[c] = mean;
    const double divisor = convention == StdConvention::Sample ? n - 1.0 : n;
    if (divisor <= 0.0 || ss == 0.0) {
      stats.degenerate[c] = true;
      continue;
    }
    stats.ls[c] = std::sqrt(ss / divisor);
  }
  return stats;
}

SparseTraitMatrix apply_transform(const SparseTraitMatrix& raw, const TraitStats& stats) {
  std::vector<double> z(raw.size());
  auto entries = raw.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (e.col >= stats.n_cols() || !stats.present[e.col]) {
      fail(ErrorCode::MissingStats, "no statistics for column " + std::to_string(e.col));
    }
    if (stats.degenerate[e.col]) {
      fail(ErrorCode::DegenerateColumn, "column " + std::to_string(e.col) + " has zero log-variance");
    }
    if (!(e.value > 0.0)) fail(ErrorCode::NonPositiveValue, "value " + std::to_string(e.value));
    z[i] = (std::log(e.value) - stats.lm[e.col]) / stats.ls[e.col];
  }
  return raw.with_values(z);
}

Transformed transform(const SparseTraitMatrix& raw, StdConvention convention) {
  TraitStats stats = compute_stats(raw, convention);
  SparseTraitMatrix z = apply_transform(raw, stats);
  return {std::move(z), std::move(stats)};
}

double inverse_value(double z, const TraitStats& stats, std::size_t col) {
  if (!stats.usable(col)) fail(ErrorCode::MissingStats, "no usable statistics for column " + std::to_string(col));
  return std::exp(z * stats.ls[col] + stats.lm[col]);
}

SparseTraitMatrix inverse_transform(const SparseTraitMatrix& z, const TraitStats& stats) {
  std::vector<double> x(z.size());
  auto entries = z.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) x[i] = inverse_value(entries[i].value, stats, entries[i].col);
  return z.with_values(x);
}

SparseTraitMatrix keep_transformable(const SparseTraitMatrix& m, const TraitStats& stats) {
  std::vector<TraitEntry> kept;
  kept.reserve(m.size());
  for (const auto& e : m.entries()) {
    if (stats.usable(e.col)) kept.push_back(e);
  }
  return SparseTraitMatrix(m.level(), m.n_rows(), m.n_cols(), std::move(kept));
}

std::vector<SparseTraitMatrix> aggregate_levels(const SparseTraitMatrix& leaf, const TaxonomyTree& tree) {
  const int L = tree.depth();
  if (leaf.n_rows() != tree.leaf_count()) {
    fail(ErrorCode::RowMismatch, std::to_string(leaf.n_rows()) + " matrix rows vs " +
                                     std::to_string(tree.leaf_count()) + " leaves in the tree");
  }
  const std::size_t M = leaf.n_cols();
  std::vector<SparseTraitMatrix> out;
  out.reserve(L);
  for (int level = 1; level < L; ++level) {
    struct Acc {
      double sum = 0.0;
      std::size_t count = 0;
    };
    std::unordered_map<std::size_t, Acc> acc;
    for (const auto& e : leaf.entries()) {
      auto& a = acc[tree.ancestor(e.row, level) * M + e.col];
      a.sum += e.value;
      ++a.count;
    }
    std::vector<TraitEntry> entries;
    entries.reserve(acc.size());
    for (const auto& [key, a] : acc) entries.push_back({key / M, key % M, a.sum / static_cast<double>(a.count)});
    out.emplace_back(level, tree.nodes_at(level), M, std::move(entries));
  }
  out.push_back(leaf.with_level(L));
  return out;
}

namespace {

SplitBundle assemble(const SparseTraitMatrix& leaf, const std::vector<int>& assignment, std::uint64_t seed) {
  std::vector<TraitEntry> parts[3];
  auto entries = leaf.entries();
  for (std::size_t i = 0; i < entries.size(); ++i) parts[assignment[i]].push_back(entries[i]);
  SplitBundle b;
  b.train = SparseTraitMatrix(leaf.level(), leaf.n_rows(), leaf.n_cols(), std::move(parts[0]));
  b.validation = SparseTraitMatrix(leaf.level(), leaf.n_rows(), leaf.n_cols(), std::move(parts[1]));
  b.test = SparseTraitMatrix(leaf.level(), leaf.n_rows(), leaf.n_cols(), std::move(parts[2]));
  b.seed = seed;
  return b;
}

constexpr int kTrain = 0;
constexpr int kValidation = 1;
constexpr int kTest = 2;

}  // namespace

SplitBundle split_per_plant(const SparseTraitMatrix& leaf, std::uint64_t seed) {
  if (leaf.empty()) fail(ErrorCode::EmptyInput, "nothing to split");
  Rng rng = make_rng(seed, "split_per_plant");
  std::vector<int> assignment(leaf.size(), kTrain);
  std::size_t offset = 0;
  for (std::size_t r = 0; r < leaf.n_rows(); ++r) {
    const std::size_t n = leaf.row_count(r);
    if (n >= 2) {
      std::uniform_int_distribution<std::size_t> pick_test(0, n - 1);
      const std::size_t t = pick_test(rng);
      assignment[offset + t] = kTest;
      if (n >= 3) {
        std::uniform_int_distribution<std::size_t> pick_val(0, n - 2);
        std::size_t v = pick_val(rng);
        if (v >= t) ++v;
        assignment[offset + v] = kValidation;
      }
    }
    offset += n;
  }
  return assemble(leaf, assignment, seed);
}

SplitBundle split_random(const SparseTraitMatrix& leaf, SplitFractions f, std::uint64_t seed) {
  if (!(f.train > 0.0 && f.validation > 0.0 && f.test > 0.0) ||
      std::abs(f.train + f.validation + f.test - 1.0) > 1e-9) {
    fail(ErrorCode::BadFractions, "fractions must be positive and sum to 1");
  }
  if (leaf.empty()) fail(ErrorCode::EmptyInput, "nothing to split");
  const std::size_t S = leaf.size();
  // Train takes floor(train * S); validation gets its floored share of the
  // remainder and test the rest, so 9 entries split 7/1/1. The small slack
  // keeps products such as 0.8 * 30 from flooring one short.
  const auto n_train = static_cast<std::size_t>(std::floor(f.train * static_cast<double>(S) + 1e-9));
  const std::size_t rest = S - n_train;
  const auto n_val =
      static_cast<std::size_t>(std::floor(f.validation / (f.validation + f.test) * static_cast<double>(rest) + 1e-9));
  std::vector<std::size_t> order(S);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = make_rng(seed, "split_random");
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<int> assignment(S, kTrain);
  for (std::size_t i = n_train; i < n_train + n_val; ++i) assignment[order[i]] = kValidation;
  for (std::size_t i = n_train + n_val; i < S; ++i) assignment[order[i]] = kTest;
  return assemble(leaf, assignment, seed);
}

}  // namespace hpmf
