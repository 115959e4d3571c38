#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hpmf/baseline.hpp"
#include "hpmf/evaluation.hpp"
#include "hpmf/factorization.hpp"
#include "hpmf/taxonomy.hpp"
#include "hpmf/trait_data.hpp"

namespace hpmf::io {

namespace fs = std::filesystem;

// Shortest text that parses back to the same double.
std::string format_double(double x);
// Whole-string decimal parse; throws ParseError.
double parse_double(std::string_view s);
std::uint64_t parse_uint(std::string_view s);

std::string read_file(const fs::path& path);
// Writes to a temporary sibling and renames it over `path`.
void atomic_write(const fs::path& path, std::string_view content);
// FNV-1a of the file bytes, as 16 hex digits.
std::string file_hash(const fs::path& path);

/// Comma-separated lines of a text file; blank lines are skipped. Each row
/// keeps its 1-based line number for error messages.
struct CsvRow {
  std::size_t line;
  std::vector<std::string> fields;
};
std::vector<CsvRow> read_csv(const fs::path& path, char sep = ',');

// ---------------------------------------------------------------------------

// Header `leaf_id,<level_1>,...,<level_{L-1}>`. The leaf level takes the name
// of the first header field.
TaxonomyTree read_taxonomy(const fs::path& path);
void write_taxonomy(const fs::path& path, const TaxonomyTree& tree);

struct TraitTable {
  SparseTraitMatrix matrix;
  std::vector<std::string> trait_ids;
};

/// Long-form `leaf_id,trait_id,value`. Columns follow first appearance unless
/// `trait_ids` is given, in which case unknown trait ids are rejected.
TraitTable read_traits(const fs::path& path, const TaxonomyTree& tree,
                       std::optional<std::vector<std::string>> trait_ids = std::nullopt);
void write_traits(const fs::path& path, const SparseTraitMatrix& m, const TaxonomyTree& tree,
                  std::span<const std::string> trait_ids);

/// Upper-level observations, `level,node_id,trait_id,value`; returns one
/// matrix per level 1..L-1 of `tree`.
std::vector<SparseTraitMatrix> read_upper_levels(const fs::path& path, const TaxonomyTree& tree,
                                                 std::span<const std::string> trait_ids);
void write_upper_levels(const fs::path& path, std::span<const SparseTraitMatrix> levels, const TaxonomyTree& tree,
                        std::span<const std::string> trait_ids);

// `trait_id,lm,ls,std_convention`; columns without usable stats have empty lm/ls.
void write_stats(const fs::path& path, const TraitStats& stats, std::span<const std::string> trait_ids);
TraitStats read_stats(const fs::path& path, std::span<const std::string> trait_ids);

/// Blocks for levels 0..L, U before V; each block is a `level,side,k,n` header
/// line followed by n lines of k values.
std::string serialize_factors(const FactorSet& f);
FactorSet deserialize_factors(std::string_view text);
void write_factors(const fs::path& path, const FactorSet& f);
FactorSet read_factors(const fs::path& path);

// `kind,pass,direction,level,objective,validation_rmse`, then `stop,<reason>,<best_pass>`.
void write_trace(const fs::path& path, const TrainTrace& trace);

// `level,node_id,trait_id,mean,count`, non-empty cells only; level 0 is the global row.
void write_mean_tables(const fs::path& path, const MeanTables& tables, const TaxonomyTree& tree,
                       std::span<const std::string> trait_ids);
MeanTables read_mean_tables(const fs::path& path, const TaxonomyTree& tree, std::span<const std::string> trait_ids);

void write_report(const fs::path& path, std::span<const AblationCell> cells);
void write_scatter(const fs::path& path, std::span<const ScatterRow> rows, const TaxonomyTree& tree);
void write_correlation(const fs::path& path, const CorrelationReport& report, const TaxonomyTree& tree);

struct PredictionRow {
  std::size_t row;
  std::size_t col;
  std::optional<double> value;
  std::optional<int> level_used;
};
// Adds the level_used column when `with_level` is set. Missing values are empty fields.
void write_predictions(const fs::path& path, std::span<const PredictionRow> rows, const TaxonomyTree& tree,
                       std::span<const std::string> trait_ids, bool with_level);

}  // namespace hpmf::io
