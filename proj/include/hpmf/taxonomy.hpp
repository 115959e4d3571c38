#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace hpmf {

// One leaf and its lineage, top level first. `ancestors.size()` must be L-1.
struct LineageRecord {
  std::string leaf;
  std::vector<std::string> ancestors;
};

/// Balanced L-level hierarchy. Levels are numbered 1 (top) .. L (leaves);
/// node indices are dense and 0-based within each level, assigned in order of
/// first appearance in the input records.
class TaxonomyTree {
 public:
  TaxonomyTree() = default;

  int depth() const noexcept { return static_cast<int>(level_names_.size()); }
  const std::vector<std::string>& level_names() const noexcept { return level_names_; }

  std::size_t nodes_at(int level) const;
  std::size_t leaf_count() const { return nodes_at(depth()); }
  std::vector<std::size_t> nodes_per_level() const;

  // Parent index at level-1; level must be in 2..L.
  std::size_t parent(int level, std::size_t node) const;
  std::span<const std::size_t> children(int level, std::size_t node) const;

  /// Ancestor of `leaf` at `level` (1..L). ancestor(leaf, L) == leaf.
  std::size_t ancestor(std::size_t leaf, int level) const;

  const std::string& label(int level, std::size_t node) const;
  // Returns nodes_at(level) when the label is unknown.
  std::size_t find(int level, const std::string& label) const;

  /// Tree keeping the leaf level and the top `upper_levels` ancestor levels.
  /// Leaf indices are preserved.
  TaxonomyTree truncated(int upper_levels) const;

  /// Lineage records reproducing this tree, in leaf order.
  std::vector<LineageRecord> records() const;

  friend TaxonomyTree build_tree(std::span<const LineageRecord> records,
                                 std::vector<std::string> level_names);

 private:
  void check_level(int level) const;

  std::vector<std::string> level_names_;
  // Indexed by level-1.
  std::vector<std::vector<std::string>> labels_;
  std::vector<std::unordered_map<std::string, std::size_t>> label_index_;
  // parent_[l] maps nodes of level l+1 to level l; parent_[0] is unused.
  std::vector<std::vector<std::size_t>> parent_;
  // CSR children lists: children of node n at level l+1 are
  // child_ids_[l][child_ptr_[l][n] .. child_ptr_[l][n+1]).
  std::vector<std::vector<std::size_t>> child_ptr_;
  std::vector<std::vector<std::size_t>> child_ids_;
  // ancestors_[l][leaf] for l = 0..L-1
  std::vector<std::vector<std::size_t>> ancestors_;
};

/// Builds and validates a balanced tree. `level_names` lists all L levels,
/// top first, leaf level last.
///
/// Throws EmptyInput, DuplicateLeaf, InconsistentLineage, or InvalidArgument for
/// records whose lineage length differs from L-1.
TaxonomyTree build_tree(std::span<const LineageRecord> records, std::vector<std::string> level_names);

}  // namespace hpmf
