#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hpmf/factorization.hpp"
#include "hpmf/taxonomy.hpp"
#include "hpmf/trait_data.hpp"

namespace hpmf {

struct TruthPrediction {
  double truth;
  double prediction;
};

// sqrt(sum (a - a_hat)^2 / T). Throws EmptyList, or InvalidArgument on non-finite input.
double rmse(std::span<const TruthPrediction> pairs);

struct AbPartition {
  // Test entries whose species has another leaf with the same column in training.
  SparseTraitMatrix part_a;
  SparseTraitMatrix part_b;
};

/// Needs a tree with at least two levels; the species is the leaf's parent.
AbPartition partition_ab(const SparseTraitMatrix& test, const SparseTraitMatrix& train, const TaxonomyTree& tree);

struct PredictableSubset {
  SparseTraitMatrix kept;
  std::size_t dropped = 0;
  double dropped_fraction = 0.0;
};

/// Keeps test entries whose row has at least one training entry.
PredictableSubset filter_predictable(const SparseTraitMatrix& test, const SparseTraitMatrix& train);

/// Predictions of `f` at every entry of `cells`.
SparseTraitMatrix predict_entries(const FactorSet& f, const SparseTraitMatrix& cells);

// Drops entries in columns without training data.
SparseTraitMatrix keep_trained_columns(const SparseTraitMatrix& m, const SparseTraitMatrix& train);

struct PreparedSplit {
  SparseTraitMatrix train;
  SparseTraitMatrix validation;
  SparseTraitMatrix test;
  // Supplied upper-level matrices, transformed like the leaves.
  std::vector<SparseTraitMatrix> upper;
  // Set when the raw values were transformed with training statistics.
  std::optional<TraitStats> stats;
  // Columns whose training values were constant or single; their entries are dropped.
  std::vector<std::size_t> dropped_columns;
  // Share of the test entries kept after removing unpredictable ones.
  double predictable_fraction = 1.0;
};

/// Readies a split for training: held-out entries in columns without
/// training data are dropped, values optionally log/z-transformed with
/// statistics of the training entries, and test entries of rows without
/// training data removed.
PreparedSplit prepare_split(const SplitBundle& split, bool transform_raw,
                            std::span<const SparseTraitMatrix> upper = {});

/// Level matrices 1..L for training: aggregated training leaves, with the
/// upper levels replaced by `upper` (levels 1..L-1 of `tree`) when given.
std::vector<SparseTraitMatrix> training_levels(const SparseTraitMatrix& train, const TaxonomyTree& tree,
                                               std::span<const SparseTraitMatrix> upper = {});

// ---------------------------------------------------------------------------

enum class MethodKind { Mean, Pmf, Lpmf, Hrpmf, Hpmf };

std::string_view to_string(MethodKind m);
// Accepts lower-case names; throws InvalidArgument.
MethodKind parse_method(std::string_view name);

/// "none", "all", or the '+'-joined short names of the kept upper levels.
std::string levels_label(const TaxonomyTree& tree, int upper_levels);
// Inverse of levels_label; also accepts the tree's own level names. Throws InvalidArgument.
int parse_levels(const TaxonomyTree& tree, std::string_view label);

/// Trains one factorization method on a prepared split. The tree may be a
/// truncation; `upper` then needs at least its ancestor levels.
TrainResult train_model(MethodKind m, const SparseTraitMatrix& train, const SparseTraitMatrix& validation,
                        const TaxonomyTree& tree, const Hyperparams& h,
                        std::span<const SparseTraitMatrix> upper = {});

// Which methods have a cell in a given row (PMF without hierarchy, the
// hierarchical factorizations only with it, MEAN everywhere).
bool method_applies(MethodKind m, int upper_levels);

struct AblationConfig {
  std::vector<MethodKind> methods;
  std::vector<int> upper_levels;
  int repeats = 5;
  std::uint64_t seed = 0;
  Hyperparams hyper;
  // Input holds raw positive values that still need the log/z-score transform
  // (statistics taken from each repeat's training entries).
  bool transform_raw = true;
  int jobs = 1;
  // Observed matrices of levels 1..L-1 to use instead of aggregating the
  // training leaves (e.g. the upper levels of a synthetic sample).
  std::vector<SparseTraitMatrix> upper_data;
};

struct AblationCell {
  int upper_levels = 0;
  std::string levels;
  MethodKind method = MethodKind::Mean;
  std::vector<double> rmse_per_repeat;
  double rmse_mean = 0.0;
  double rmse_std = 0.0;
  // Only for factorization methods; the trace of every repeat.
  std::vector<TrainTrace> traces;
};

struct PartStats {
  std::size_t count = 0;
  double rmse_mean = 0.0;
  double rmse_hpmf = 0.0;
};

struct EvaluationReport {
  double overall_rmse = 0.0;
  std::map<std::size_t, double> per_trait_rmse;
  std::map<std::size_t, PartStats> part_a;
  std::map<std::size_t, PartStats> part_b;
  std::vector<AblationCell> level_ablation;
  double predictable_fraction = 1.0;
};

/// Repeated per-plant splits; for every kept-level prefix the tree is
/// truncated, training entries aggregated, each method trained and scored on
/// the leaf test entries. Cells come back ordered by (prefix, method).
EvaluationReport run_ablation(const SparseTraitMatrix& leaf, const TaxonomyTree& tree, const AblationConfig& cfg);

/// One per-plant split; MEAN and HPMF on the full hierarchy, scored per trait
/// on the two test parts.
EvaluationReport run_ab_analysis(const SparseTraitMatrix& leaf, const TaxonomyTree& tree, const Hyperparams& h,
                                 std::uint64_t seed, bool transform_raw,
                                 std::span<const SparseTraitMatrix> upper = {});

// ---------------------------------------------------------------------------

struct CorrelationRow {
  std::size_t row;
  double truth_i;
  double truth_j;
  double pred_i;
  double pred_j;
};

struct CorrelationReport {
  std::vector<CorrelationRow> rows;
  double pearson_true = 0.0;
  double pearson_pred = 0.0;
};

// Throws InsufficientPairs for fewer than two pairs or zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

/// Rows having both columns in `truth`; `predictions` must cover the same cells.
CorrelationReport correlation_report(const SparseTraitMatrix& truth, const SparseTraitMatrix& predictions,
                                     std::size_t col_i, std::size_t col_j);

struct ScatterRow {
  std::size_t row;
  double truth;
  double prediction;
};

/// One row per entry of `col` in `truth`, ascending by row.
std::vector<ScatterRow> scatter_export(const SparseTraitMatrix& truth, const SparseTraitMatrix& predictions,
                                       std::size_t col);

/// Names of the 17 trait ids of the reference trait catalog (ids "1".."17");
/// empty for other ids.
std::string_view trait_catalog_name(std::string_view trait_id);

}  // namespace hpmf
