#include "hpmf/taxonomy.hpp"

#include "hpmf/error.hpp"

namespace hpmf {

void TaxonomyTree::check_level(int level) const {
  if (level < 1 || level > depth()) {
    fail(ErrorCode::IndexOutOfRange,
         "level " + std::to_string(level) + " outside 1.." + std::to_string(depth()));
  }
}

std::size_t TaxonomyTree::nodes_at(int level) const {
  check_level(level);
  return labels_[level - 1].size();
}

std::vector<std::size_t> TaxonomyTree::nodes_per_level() const {
  std::vector<std::size_t> counts;
  counts.reserve(labels_.size());
  for (const auto& l : labels_) counts.push_back(l.size());
  return counts;
}

std::size_t TaxonomyTree::parent(int level, std::size_t node) const {
  check_level(level);
  if (level == 1) fail(ErrorCode::IndexOutOfRange, "top-level nodes have no parent in the tree");
  if (node >= parent_[level - 1].size()) fail(ErrorCode::IndexOutOfRange, "node index " + std::to_string(node));
  return parent_[level - 1][node];
}

std::span<const std::size_t> TaxonomyTree::children(int level, std::size_t node) const {
  check_level(level);
  if (level == depth()) return {};
  const auto& ptr = child_ptr_[level - 1];
  if (node + 1 >= ptr.size()) fail(ErrorCode::IndexOutOfRange, "node index " + std::to_string(node));
  const auto& ids = child_ids_[level - 1];
  return std::span<const std::size_t>(ids.data() + ptr[node], ptr[node + 1] - ptr[node]);
}

std::size_t TaxonomyTree::ancestor(std::size_t leaf, int level) const {
  check_level(level);
  if (leaf >= leaf_count()) fail(ErrorCode::IndexOutOfRange, "leaf index " + std::to_string(leaf));
  return ancestors_[level - 1][leaf];
}

const std::string& TaxonomyTree::label(int level, std::size_t node) const {
  check_level(level);
  if (node >= labels_[level - 1].size()) fail(ErrorCode::IndexOutOfRange, "node index " + std::to_string(node));
  return labels_[level - 1][node];
}

std::size_t TaxonomyTree::find(int level, const std::string& label) const {
  check_level(level);
  const auto& index = label_index_[level - 1];
  auto it = index.find(label);
  return it == index.end() ? labels_[level - 1].size() : it->second;
}

std::vector<LineageRecord> TaxonomyTree::records() const {
  const int L = depth();
  std::vector<LineageRecord> out;
  out.reserve(leaf_count());
  for (std::size_t leaf = 0; leaf < leaf_count(); ++leaf) {
    LineageRecord rec;
    rec.leaf = labels_[L - 1][leaf];
    for (int l = 1; l < L; ++l) rec.ancestors.push_back(labels_[l - 1][ancestors_[l - 1][leaf]]);
    out.push_back(std::move(rec));
  }
  return out;
}

TaxonomyTree TaxonomyTree::truncated(int upper_levels) const {
  const int L = depth();
  if (upper_levels < 0 || upper_levels > L - 1) {
    fail(ErrorCode::InvalidArgument, "cannot keep " + std::to_string(upper_levels) + " upper levels of a " +
                                         std::to_string(L) + "-level tree");
  }
  auto recs = records();
  for (auto& r : recs) r.ancestors.resize(static_cast<std::size_t>(upper_levels));
  std::vector<std::string> names(level_names_.begin(), level_names_.begin() + upper_levels);
  names.push_back(level_names_.back());
  return build_tree(recs, std::move(names));
}

TaxonomyTree build_tree(std::span<const LineageRecord> records, std::vector<std::string> level_names) {
  if (level_names.empty()) fail(ErrorCode::InvalidArgument, "at least one level name is required");
  if (records.empty()) fail(ErrorCode::EmptyInput, "no lineage records");

  const int L = static_cast<int>(level_names.size());
  TaxonomyTree tree;
  tree.level_names_ = std::move(level_names);
  tree.labels_.resize(L);
  tree.label_index_.resize(L);
  tree.parent_.resize(L);
  tree.ancestors_.resize(L);

  auto intern = [&](int l, const std::string& label, bool& inserted) {
    auto [it, fresh] = tree.label_index_[l].try_emplace(label, tree.labels_[l].size());
    if (fresh) tree.labels_[l].push_back(label);
    inserted = fresh;
    return it->second;
  };

  for (const auto& rec : records) {
    if (rec.ancestors.size() != static_cast<std::size_t>(L - 1)) {
      fail(ErrorCode::InvalidArgument, "leaf '" + rec.leaf + "' has " + std::to_string(rec.ancestors.size()) +
                                           " ancestor labels, expected " + std::to_string(L - 1));
    }
    std::size_t parent_idx = 0;
    for (int l = 0; l < L; ++l) {
      const std::string& label = (l == L - 1) ? rec.leaf : rec.ancestors[l];
      if (label.empty()) fail(ErrorCode::InvalidArgument, "empty label in lineage of leaf '" + rec.leaf + "'");
      bool fresh = false;
      std::size_t idx = intern(l, label, fresh);
      if (l == L - 1 && !fresh) fail(ErrorCode::DuplicateLeaf, "leaf '" + rec.leaf + "' appears more than once");
      if (l > 0) {
        auto& parents = tree.parent_[l];
        if (fresh) {
          parents.push_back(parent_idx);
        } else if (parents[idx] != parent_idx) {
          fail(ErrorCode::InconsistentLineage,
               tree.level_names_[l] + " '" + label + "' is placed under both " + tree.level_names_[l - 1] + " '" +
                   tree.labels_[l - 1][parents[idx]] + "' and '" + tree.labels_[l - 1][parent_idx] + "'");
        }
      }
      parent_idx = idx;
    }
  }

  tree.child_ptr_.resize(L);
  tree.child_ids_.resize(L);
  for (int l = 0; l + 1 < L; ++l) {
    const auto& parents = tree.parent_[l + 1];
    auto& ptr = tree.child_ptr_[l];
    ptr.assign(tree.labels_[l].size() + 1, 0);
    for (std::size_t p : parents) ++ptr[p + 1];
    for (std::size_t i = 1; i < ptr.size(); ++i) ptr[i] += ptr[i - 1];
    auto& ids = tree.child_ids_[l];
    ids.resize(parents.size());
    std::vector<std::size_t> cursor(ptr.begin(), ptr.end() - 1);
    for (std::size_t c = 0; c < parents.size(); ++c) ids[cursor[parents[c]]++] = c;
  }

  const std::size_t n_leaves = tree.labels_[L - 1].size();
  tree.ancestors_[L - 1].resize(n_leaves);
  for (std::size_t i = 0; i < n_leaves; ++i) tree.ancestors_[L - 1][i] = i;
  for (int l = L - 2; l >= 0; --l) {
    tree.ancestors_[l].resize(n_leaves);
    for (std::size_t i = 0; i < n_leaves; ++i) tree.ancestors_[l][i] = tree.parent_[l + 1][tree.ancestors_[l + 1][i]];
  }
  return tree;
}

}  // namespace hpmf
