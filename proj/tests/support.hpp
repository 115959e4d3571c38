#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "hpmf/factorization.hpp"
#include "hpmf/taxonomy.hpp"
#include "hpmf/trait_data.hpp"

namespace testing {

// Balanced tree; branching[i] children per node of level i (level 0 is the root).
inline hpmf::TaxonomyTree balanced_tree(const std::vector<int>& branching) {
  const std::size_t L = branching.size();
  std::vector<std::size_t> below(L + 1, 1);
  for (std::size_t l = L; l-- > 0;) below[l] = below[l + 1] * static_cast<std::size_t>(branching[l]);
  std::vector<hpmf::LineageRecord> records;
  for (std::size_t i = 0; i < below[0]; ++i) {
    hpmf::LineageRecord r{"leaf" + std::to_string(i), {}};
    for (std::size_t l = 1; l < L; ++l) r.ancestors.push_back("n" + std::to_string(l) + "_" + std::to_string(i / below[l]));
    records.push_back(std::move(r));
  }
  std::vector<std::string> names;
  for (std::size_t l = 1; l < L; ++l) names.push_back("level" + std::to_string(l));
  names.push_back("leaf");
  return hpmf::build_tree(records, names);
}

// Unbalanced tree with `leaves` leaves under `depth` levels; every upper node
// picks a random parent, every leaf a random level-(depth-1) node.
inline hpmf::TaxonomyTree random_tree(std::mt19937_64& rng, int depth, std::size_t leaves, std::size_t width = 4) {
  std::vector<std::vector<std::size_t>> parent(static_cast<std::size_t>(depth));
  std::size_t count = 1;
  for (int l = 1; l < depth; ++l) {
    const std::size_t n = count * (1 + rng() % width);
    for (std::size_t i = 0; i < n; ++i) parent[l].push_back(i < count ? i : rng() % count);
    count = n;
  }
  std::vector<hpmf::LineageRecord> records;
  for (std::size_t i = 0; i < leaves; ++i) {
    hpmf::LineageRecord r{"leaf" + std::to_string(i), std::vector<std::string>(static_cast<std::size_t>(depth - 1))};
    std::size_t node = depth > 1 ? rng() % count : 0;
    for (int l = depth - 1; l >= 1; --l) {
      r.ancestors[static_cast<std::size_t>(l - 1)] = "g" + std::to_string(l) + "_" + std::to_string(node);
      node = parent[l][node];
    }
    records.push_back(std::move(r));
  }
  std::vector<std::string> names;
  for (int l = 1; l < depth; ++l) names.push_back("level" + std::to_string(l));
  names.push_back("leaf");
  return hpmf::build_tree(records, names);
}

// Each cell kept with probability `density`, values standard normal.
inline hpmf::SparseTraitMatrix random_matrix(int level, std::size_t rows, std::size_t cols, double density,
                                             std::mt19937_64& rng, bool positive = false) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<hpmf::TraitEntry> entries;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (unit(rng) >= density) continue;
      const double z = normal(rng);
      entries.push_back({r, c, positive ? std::exp(z) : z});
    }
  }
  return hpmf::SparseTraitMatrix(level, rows, cols, std::move(entries));
}

// Random data for every level of `tree`.
inline std::vector<hpmf::SparseTraitMatrix> random_levels(const hpmf::TaxonomyTree& tree, std::size_t cols,
                                                          double density, std::mt19937_64& rng) {
  std::vector<hpmf::SparseTraitMatrix> out;
  for (int l = 1; l <= tree.depth(); ++l) out.push_back(random_matrix(l, tree.nodes_at(l), cols, density, rng));
  return out;
}

// Random factors at every level, root vectors included.
inline hpmf::FactorSet random_factors(const hpmf::TaxonomyTree& tree, std::size_t cols, std::size_t k,
                                      std::mt19937_64& rng, double scale = 0.5) {
  std::normal_distribution<double> normal(0.0, scale);
  hpmf::FactorSet f = hpmf::FactorSet::zeros(tree, cols, k);
  for (auto& m : f.U) {
    for (double& x : m.values()) x = normal(rng);
  }
  for (auto& m : f.V) {
    for (double& x : m.values()) x = normal(rng);
  }
  return f;
}

}  // namespace testing
