#include "hpmf/evaluation.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>
#include <unordered_map>

#include "hpmf/baseline.hpp"
#include "hpmf/error.hpp"
#include "hpmf/rng.hpp"

namespace hpmf {

double rmse(std::span<const TruthPrediction> pairs) {
  if (pairs.empty()) fail(ErrorCode::EmptyList, "no (truth, prediction) pairs");
  double s = 0.0;
  for (const auto& p : pairs) {
    if (!std::isfinite(p.truth) || !std::isfinite(p.prediction)) fail(ErrorCode::InvalidArgument, "non-finite value");
    const double d = p.truth - p.prediction;
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(pairs.size()));
}

AbPartition partition_ab(const SparseTraitMatrix& test, const SparseTraitMatrix& train, const TaxonomyTree& tree) {
  const int L = tree.depth();
  if (L < 2) fail(ErrorCode::InvalidArgument, "part A/B needs a species level above the leaves");
  if (test.n_rows() != tree.leaf_count() || train.n_rows() != tree.leaf_count()) {
    fail(ErrorCode::RowMismatch, "matrices do not match the tree's leaves");
  }
  const std::size_t M = train.n_cols();
  std::unordered_map<std::size_t, std::size_t> observed;  // (species, col) -> training entries
  for (const auto& e : train.entries()) ++observed[tree.ancestor(e.row, L - 1) * M + e.col];

  std::vector<TraitEntry> a;
  std::vector<TraitEntry> b;
  for (const auto& e : test.entries()) {
    auto it = observed.find(tree.ancestor(e.row, L - 1) * M + e.col);
    std::size_t mates = it == observed.end() ? 0 : it->second;
    if (mates > 0 && train.find(e.row, e.col)) --mates;
    (mates > 0 ? a : b).push_back(e);
  }
  return {SparseTraitMatrix(test.level(), test.n_rows(), test.n_cols(), std::move(a)),
          SparseTraitMatrix(test.level(), test.n_rows(), test.n_cols(), std::move(b))};
}

PredictableSubset filter_predictable(const SparseTraitMatrix& test, const SparseTraitMatrix& train) {
  if (test.n_rows() != train.n_rows()) fail(ErrorCode::RowMismatch, "test and train row counts differ");
  std::vector<TraitEntry> kept;
  for (const auto& e : test.entries()) {
    if (train.row_count(e.row) > 0) kept.push_back(e);
  }
  PredictableSubset out;
  out.dropped = test.size() - kept.size();
  out.dropped_fraction = test.empty() ? 0.0 : static_cast<double>(out.dropped) / static_cast<double>(test.size());
  out.kept = SparseTraitMatrix(test.level(), test.n_rows(), test.n_cols(), std::move(kept));
  return out;
}

SparseTraitMatrix predict_entries(const FactorSet& f, const SparseTraitMatrix& cells) {
  std::vector<double> values;
  values.reserve(cells.size());
  for (const auto& e : cells.entries()) values.push_back(predict(f, e.row, e.col));
  return cells.with_values(values);
}

std::string_view to_string(MethodKind m) {
  switch (m) {
    case MethodKind::Mean: return "MEAN";
    case MethodKind::Pmf: return "PMF";
    case MethodKind::Lpmf: return "LPMF";
    case MethodKind::Hrpmf: return "HRPMF";
    case MethodKind::Hpmf: return "HPMF";
  }
  return "?";
}

MethodKind parse_method(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "mean") return MethodKind::Mean;
  if (lower == "pmf") return MethodKind::Pmf;
  if (lower == "lpmf") return MethodKind::Lpmf;
  if (lower == "hrpmf") return MethodKind::Hrpmf;
  if (lower == "hpmf") return MethodKind::Hpmf;
  fail(ErrorCode::InvalidArgument, "unknown method '" + std::string(name) + "'");
}

namespace {

constexpr std::array<std::string_view, 4> kShortLevelNames{"phylo", "family", "genus", "species"};

std::string short_level_name(const TaxonomyTree& tree, int level) {
  if (tree.depth() == 5) return std::string(kShortLevelNames[level - 1]);
  return tree.level_names()[level - 1];
}

}  // namespace

std::string levels_label(const TaxonomyTree& tree, int upper_levels) {
  if (upper_levels == 0) return "none";
  if (upper_levels == tree.depth() - 1) return "all";
  std::string out;
  for (int l = 1; l <= upper_levels; ++l) {
    if (l > 1) out += '+';
    out += short_level_name(tree, l);
  }
  return out;
}

int parse_levels(const TaxonomyTree& tree, std::string_view label) {
  const int max_upper = tree.depth() - 1;
  if (label == "none") return 0;
  if (label == "all") return max_upper;
  int count = 0;
  std::size_t start = 0;
  while (start <= label.size()) {
    const std::size_t end = std::min(label.find('+', start), label.size());
    const std::string_view token = label.substr(start, end - start);
    ++count;
    if (count > max_upper) break;
    if (token != short_level_name(tree, count) && token != tree.level_names()[count - 1]) {
      fail(ErrorCode::InvalidArgument, "level prefix '" + std::string(label) + "' does not match the tree's levels");
    }
    start = end + 1;
  }
  if (count > max_upper) {
    fail(ErrorCode::InvalidArgument, "level prefix '" + std::string(label) + "' is longer than the hierarchy");
  }
  return count;
}

bool method_applies(MethodKind m, int upper_levels) {
  switch (m) {
    case MethodKind::Mean: return true;
    case MethodKind::Pmf: return upper_levels == 0;
    default: return upper_levels > 0;
  }
}

SparseTraitMatrix keep_trained_columns(const SparseTraitMatrix& m, const SparseTraitMatrix& train) {
  std::vector<TraitEntry> kept;
  for (const auto& e : m.entries()) {
    if (train.col_count(e.col) > 0) kept.push_back(e);
  }
  return SparseTraitMatrix(m.level(), m.n_rows(), m.n_cols(), std::move(kept));
}

PreparedSplit prepare_split(const SplitBundle& split, bool transform_raw, std::span<const SparseTraitMatrix> upper) {
  PreparedSplit p;
  SparseTraitMatrix train = split.train;
  SparseTraitMatrix val = keep_trained_columns(split.validation, train);
  SparseTraitMatrix test = keep_trained_columns(split.test, train);
  p.upper.assign(upper.begin(), upper.end());
  if (transform_raw) {
    TraitStats stats = compute_stats(train);
    for (std::size_t c = 0; c < stats.n_cols(); ++c) {
      if (stats.present[c] && stats.degenerate[c]) p.dropped_columns.push_back(c);
    }
    train = apply_transform(keep_transformable(train, stats), stats);
    val = apply_transform(keep_transformable(val, stats), stats);
    test = apply_transform(keep_transformable(test, stats), stats);
    for (auto& m : p.upper) m = apply_transform(keep_transformable(m, stats), stats);
    p.stats = std::move(stats);
  }
  p.train = std::move(train);
  p.validation = std::move(val);
  auto predictable = filter_predictable(test, p.train);
  p.test = std::move(predictable.kept);
  p.predictable_fraction =
      split.test.empty() ? 1.0 : static_cast<double>(p.test.size()) / static_cast<double>(split.test.size());
  return p;
}

std::vector<SparseTraitMatrix> training_levels(const SparseTraitMatrix& train, const TaxonomyTree& tree,
                                               std::span<const SparseTraitMatrix> upper) {
  auto data = aggregate_levels(train, tree);
  if (upper.empty()) return data;
  if (upper.size() < static_cast<std::size_t>(tree.depth() - 1)) {
    fail(ErrorCode::DimensionMismatch, "fewer supplied upper levels than the tree has");
  }
  for (int l = 1; l < tree.depth(); ++l) {
    const auto& m = upper[l - 1];
    if (m.n_rows() != tree.nodes_at(l) || m.n_cols() != train.n_cols()) {
      fail(ErrorCode::DimensionMismatch, "supplied matrix of level " + std::to_string(l));
    }
    data[l - 1] = m.with_level(l);
  }
  return data;
}

namespace {

std::vector<TruthPrediction> mean_pairs(const SparseTraitMatrix& train, const SparseTraitMatrix& test,
                                        const TaxonomyTree& tree) {
  const MeanTables tables = build_mean_tables(train, tree);
  std::vector<TruthPrediction> pairs;
  pairs.reserve(test.size());
  for (const auto& e : test.entries()) {
    auto p = mean_predict(tables, tree, e.row, e.col, tree.depth() - 1);
    if (!p) fail(ErrorCode::InvalidArgument, "test column without training data reached MEAN");
    pairs.push_back({e.value, p->value});
  }
  return pairs;
}

std::vector<TruthPrediction> factor_pairs(const FactorSet& f, const SparseTraitMatrix& test) {
  std::vector<TruthPrediction> pairs;
  pairs.reserve(test.size());
  for (const auto& e : test.entries()) pairs.push_back({e.value, predict(f, e.row, e.col)});
  return pairs;
}

template <class Task>
void run_parallel(std::size_t n_tasks, int jobs, Task task) {
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), n_tasks));
  if (workers == 1) {
    for (std::size_t i = 0; i < n_tasks; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n_tasks; i = next++) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

double sample_std(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

}  // namespace

TrainResult train_model(MethodKind m, const SparseTraitMatrix& train, const SparseTraitMatrix& validation,
                        const TaxonomyTree& tree, const Hyperparams& h, std::span<const SparseTraitMatrix> upper) {
  if (m == MethodKind::Pmf) return train_pmf(train, validation, h);
  const auto data = training_levels(train, tree, upper);
  switch (m) {
    case MethodKind::Lpmf: return train_lpmf(data, validation, tree, h);
    case MethodKind::Hrpmf: return train_hrpmf(data, validation, tree, h);
    case MethodKind::Hpmf: return train_hpmf(data, validation, tree, h);
    default: break;
  }
  fail(ErrorCode::InvalidArgument, "not a factorization method");
}

EvaluationReport run_ablation(const SparseTraitMatrix& leaf, const TaxonomyTree& tree, const AblationConfig& cfg) {
  if (cfg.repeats < 1) fail(ErrorCode::InvalidArgument, "repeats must be >= 1");
  if (cfg.methods.empty() || cfg.upper_levels.empty()) fail(ErrorCode::InvalidArgument, "empty ablation grid");
  if (leaf.n_rows() != tree.leaf_count()) fail(ErrorCode::RowMismatch, "matrix rows do not match the tree's leaves");
  cfg.hyper.validate();
  if (!cfg.upper_data.empty()) {
    if (cfg.upper_data.size() != static_cast<std::size_t>(tree.depth() - 1)) {
      fail(ErrorCode::DimensionMismatch, "need one upper matrix per ancestor level");
    }
    for (int l = 1; l < tree.depth(); ++l) {
      const auto& m = cfg.upper_data[l - 1];
      if (m.level() != l || m.n_rows() != tree.nodes_at(l) || m.n_cols() != leaf.n_cols()) {
        fail(ErrorCode::DimensionMismatch, "upper matrix of level " + std::to_string(l));
      }
    }
  }

  std::vector<MethodKind> methods = cfg.methods;
  std::sort(methods.begin(), methods.end());
  methods.erase(std::unique(methods.begin(), methods.end()), methods.end());
  std::vector<int> prefixes = cfg.upper_levels;
  std::sort(prefixes.begin(), prefixes.end());
  prefixes.erase(std::unique(prefixes.begin(), prefixes.end()), prefixes.end());
  for (int p : prefixes) {
    if (p < 0 || p > tree.depth() - 1) fail(ErrorCode::InvalidArgument, "level prefix " + std::to_string(p));
  }

  std::vector<PreparedSplit> splits;
  for (int r = 0; r < cfg.repeats; ++r) {
    splits.push_back(prepare_split(split_per_plant(leaf, stream_seed(cfg.seed, "split", r)), cfg.transform_raw, cfg.upper_data));
  }
  std::vector<TaxonomyTree> trees;
  for (int p : prefixes) trees.push_back(tree.truncated(p));

  EvaluationReport report;
  struct Task {
    std::size_t cell;
    int repeat;
  };
  std::vector<Task> tasks;
  for (std::size_t pi = 0; pi < prefixes.size(); ++pi) {
    for (MethodKind m : methods) {
      if (!method_applies(m, prefixes[pi])) continue;
      AblationCell cell;
      cell.upper_levels = prefixes[pi];
      cell.levels = levels_label(tree, prefixes[pi]);
      cell.method = m;
      cell.rmse_per_repeat.assign(cfg.repeats, 0.0);
      if (m != MethodKind::Mean) cell.traces.resize(cfg.repeats);
      report.level_ablation.push_back(std::move(cell));
      for (int r = 0; r < cfg.repeats; ++r) tasks.push_back({report.level_ablation.size() - 1, r});
    }
  }

  run_parallel(tasks.size(), cfg.jobs, [&](std::size_t t) {
    const Task& task = tasks[t];
    AblationCell& cell = report.level_ablation[task.cell];
    const auto pi = static_cast<std::size_t>(std::find(prefixes.begin(), prefixes.end(), cell.upper_levels) - prefixes.begin());
    const TaxonomyTree& sub = trees[pi];
    const PreparedSplit& split = splits[task.repeat];
    if (cell.method == MethodKind::Mean) {
      cell.rmse_per_repeat[task.repeat] = rmse(mean_pairs(split.train, split.test, sub));
      return;
    }
    Hyperparams h = cfg.hyper;
    h.seed = stream_seed(cfg.seed, "train", static_cast<std::uint64_t>(task.repeat));
    // Truncation keeps the top levels, so the first p supplied matrices match.
    std::span<const SparseTraitMatrix> upper;
    if (!split.upper.empty()) upper = std::span(split.upper).first(static_cast<std::size_t>(cell.upper_levels));
    TrainResult result = train_model(cell.method, split.train, split.validation, sub, h, upper);
    cell.rmse_per_repeat[task.repeat] = rmse(factor_pairs(result.factors, split.test));
    cell.traces[task.repeat] = std::move(result.trace);
  });

  for (auto& cell : report.level_ablation) {
    double sum = 0.0;
    for (double x : cell.rmse_per_repeat) sum += x;
    cell.rmse_mean = sum / static_cast<double>(cell.rmse_per_repeat.size());
    cell.rmse_std = sample_std(cell.rmse_per_repeat, cell.rmse_mean);
  }
  double frac = 0.0;
  for (const auto& s : splits) frac += s.predictable_fraction;
  report.predictable_fraction = frac / static_cast<double>(splits.size());
  return report;
}

EvaluationReport run_ab_analysis(const SparseTraitMatrix& leaf, const TaxonomyTree& tree, const Hyperparams& h,
                                 std::uint64_t seed, bool transform_raw, std::span<const SparseTraitMatrix> upper) {
  if (tree.depth() < 2) fail(ErrorCode::InvalidArgument, "part A/B needs a species level above the leaves");
  const PreparedSplit split =
      prepare_split(split_per_plant(leaf, stream_seed(seed, "split", 0)), transform_raw, upper);
  Hyperparams hh = h;
  hh.seed = stream_seed(seed, "train", 0);
  const TrainResult hpmf = train_model(MethodKind::Hpmf, split.train, split.validation, tree, hh, split.upper);
  const MeanTables tables = build_mean_tables(split.train, tree);
  const AbPartition parts = partition_ab(split.test, split.train, tree);

  EvaluationReport report;
  report.predictable_fraction = split.predictable_fraction;
  auto hpmf_pairs = factor_pairs(hpmf.factors, split.test);
  report.overall_rmse = rmse(hpmf_pairs);

  auto fill = [&](const SparseTraitMatrix& part, std::map<std::size_t, PartStats>& out) {
    for (std::size_t c = 0; c < part.n_cols(); ++c) {
      std::vector<TruthPrediction> mean_p;
      std::vector<TruthPrediction> hpmf_p;
      for (std::size_t pos : part.col(c)) {
        const auto& e = part.entries()[pos];
        auto mp = mean_predict(tables, tree, e.row, e.col, tree.depth() - 1);
        mean_p.push_back({e.value, mp->value});
        hpmf_p.push_back({e.value, predict(hpmf.factors, e.row, e.col)});
      }
      if (mean_p.empty()) continue;
      out[c] = PartStats{mean_p.size(), rmse(mean_p), rmse(hpmf_p)};
    }
  };
  fill(parts.part_a, report.part_a);
  fill(parts.part_b, report.part_b);
  for (std::size_t c = 0; c < split.test.n_cols(); ++c) {
    std::vector<TruthPrediction> col_pairs;
    for (std::size_t pos : split.test.col(c)) {
      const auto& e = split.test.entries()[pos];
      col_pairs.push_back({e.value, predict(hpmf.factors, e.row, e.col)});
    }
    if (!col_pairs.empty()) report.per_trait_rmse[c] = rmse(col_pairs);
  }
  return report;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) fail(ErrorCode::DimensionMismatch, "pearson inputs differ in length");
  if (x.size() < 2) fail(ErrorCode::InsufficientPairs, std::to_string(x.size()) + " complete pairs");
  const double n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) fail(ErrorCode::InsufficientPairs, "zero variance; correlation undefined");
  return sxy / std::sqrt(sxx * syy);
}

CorrelationReport correlation_report(const SparseTraitMatrix& truth, const SparseTraitMatrix& predictions,
                                     std::size_t col_i, std::size_t col_j) {
  if (col_i == col_j) fail(ErrorCode::InvalidArgument, "correlation needs two distinct columns");
  if (col_i >= truth.n_cols() || col_j >= truth.n_cols()) fail(ErrorCode::IndexOutOfRange, "trait column");
  CorrelationReport rep;
  for (std::size_t r = 0; r < truth.n_rows(); ++r) {
    auto ti = truth.find(r, col_i);
    auto tj = truth.find(r, col_j);
    if (!ti || !tj) continue;
    auto pi = predictions.find(r, col_i);
    auto pj = predictions.find(r, col_j);
    if (!pi || !pj) fail(ErrorCode::InvalidArgument, "prediction missing for row " + std::to_string(r));
    rep.rows.push_back({r, *ti, *tj, *pi, *pj});
  }
  std::vector<double> a, b, c, d;
  for (const auto& row : rep.rows) {
    a.push_back(row.truth_i);
    b.push_back(row.truth_j);
    c.push_back(row.pred_i);
    d.push_back(row.pred_j);
  }
  rep.pearson_true = pearson(a, b);
  rep.pearson_pred = pearson(c, d);
  return rep;
}

std::vector<ScatterRow> scatter_export(const SparseTraitMatrix& truth, const SparseTraitMatrix& predictions,
                                       std::size_t col) {
  std::vector<ScatterRow> rows;
  for (std::size_t pos : truth.col(col)) {
    const auto& e = truth.entries()[pos];
    auto p = predictions.find(e.row, col);
    if (!p) fail(ErrorCode::InvalidArgument, "prediction missing for row " + std::to_string(e.row));
    rows.push_back({e.row, e.value, *p});
  }
  return rows;
}

std::string_view trait_catalog_name(std::string_view trait_id) {
  static constexpr std::array<std::string_view, 17> names{
      "Specific leaf area (SLA)",
      "Plant height",
      "Seed mass",
      "Leaf dry matter content (LDMC)",
      "Stem specific density (SSD)",
      "Leaf area",
      "Leaf nitrogen (LeafN)",
      "Leaf phosphorus (LeafP)",
      "Stem conduit density",
      "Seed number per reproduction unit",
      "Wood vessel element length",
      "Leaf nitrogen content per area",
      "Leaf fresh mass",
      "Leaf nitrogen phosphorus ratio (LeafN/P)",
      "Leaf carbon content per dry mass",
      "Seed length",
      "Dispersal unit length",
  };
  int id = 0;
  for (char c : trait_id) {
    if (c < '0' || c > '9') return {};
    id = id * 10 + (c - '0');
    if (id > 17) return {};
  }
  if (trait_id.empty() || id < 1) return {};
  return names[id - 1];
}

}  // namespace hpmf
