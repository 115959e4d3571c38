#include "commands.hpp"

#include <json.hpp>

#include <cmath>
#include <iostream>

#include "hpmf/baseline.hpp"
#include "hpmf/error.hpp"
#include "hpmf/evaluation.hpp"
#include "hpmf/io.hpp"
#include "hpmf/rng.hpp"

namespace hpmf::cli {

namespace {

using Json = nlohmann::ordered_json;

constexpr const char* kModelFile = "model.json";
constexpr const char* kFactorsFile = "factors.txt";
constexpr const char* kMeansFile = "mean_tables.csv";
constexpr const char* kStatsFile = "stats.csv";
constexpr const char* kTraceFile = "trace.csv";

void require(bool ok, const std::string& what) {
  if (!ok) throw UsageError(what);
}

std::size_t trait_column(std::span<const std::string> ids, const std::string& id) {
  for (std::size_t c = 0; c < ids.size(); ++c) {
    if (ids[c] == id) return c;
  }
  throw UsageError("unknown trait id '" + id + "'");
}

struct Inputs {
  TaxonomyTree tree;
  io::TraitTable traits;
  std::vector<SparseTraitMatrix> upper;
};

Inputs load_inputs(const CommonOptions& c, const std::string& upper, CommandResult& result) {
  require(!c.taxonomy.empty(), "--taxonomy is required");
  require(!c.traits.empty(), "--traits is required");
  Inputs in;
  in.tree = io::read_taxonomy(c.taxonomy);
  in.traits = io::read_traits(c.traits, in.tree);
  result.inputs["taxonomy"] = c.taxonomy;
  result.inputs["traits"] = c.traits;
  if (!upper.empty()) {
    in.upper = io::read_upper_levels(upper, in.tree, in.traits.trait_ids);
    result.inputs["upper"] = upper;
  }
  return in;
}

void report_dropped(const PreparedSplit& p, std::span<const std::string> ids) {
  for (std::size_t c : p.dropped_columns) {
    std::cerr << "warning: trait '" << ids[c] << "' has constant or single training values; its entries are dropped\n";
  }
}

SplitBundle make_split(const SparseTraitMatrix& leaf, const std::string& mode, std::uint64_t seed) {
  const std::uint64_t s = stream_seed(seed, "split", 0);
  if (mode == "per_plant") return split_per_plant(leaf, s);
  if (mode == "random") return split_random(leaf, SplitFractions{}, s);
  throw UsageError("unknown split mode '" + mode + "'");
}

Hyperparams train_hyper(const HyperOptions& h, std::uint64_t seed) {
  return h.resolve(stream_seed(seed, "train", 0));
}

}  // namespace

// ---------------------------------------------------------------------------

CommandResult cmd_synth(const CommonOptions& c, const SynthOptions& o) {
  const std::size_t L = o.branching.size();
  require(L >= 1, "--branching needs at least one level");
  for (int b : o.branching) require(b >= 1, "branching factors must be >= 1");
  require(o.n_traits >= 1, "--n-traits must be >= 1");
  require(o.raw_ls > 0.0, "--raw-ls must be > 0");

  std::vector<std::string> names = o.level_names;
  if (names.empty()) {
    if (L == 5) names = {"phylo", "family", "genus", "species"};
    for (std::size_t l = names.size() + 1; l < L; ++l) names.push_back("level" + std::to_string(l));
  }
  require(names.size() == L - 1, "--level-names needs one name per ancestor level");
  names.push_back("leaf_id");

  // suffix[l] = number of leaves below one node of level l (1-based; suffix[L] = 1)
  std::vector<std::size_t> suffix(L + 1, 1);
  for (std::size_t l = L; l-- > 0;) suffix[l] = suffix[l + 1] * static_cast<std::size_t>(o.branching[l]);
  const std::size_t leaves = suffix[0];
  std::vector<LineageRecord> records;
  records.reserve(leaves);
  for (std::size_t i = 0; i < leaves; ++i) {
    LineageRecord r{"leaf" + std::to_string(i), {}};
    for (std::size_t l = 1; l < L; ++l) r.ancestors.push_back(names[l - 1] + std::to_string(i / suffix[l]));
    records.push_back(std::move(r));
  }
  const TaxonomyTree tree = build_tree(records, names);

  SyntheticParams p;
  p.n_cols = o.n_traits;
  p.k = o.k;
  p.sigma_u = o.sigma_u;
  p.sigma_v = o.sigma_v;
  p.sigma = o.sigma;
  p.missing_rate = o.missing_rates;
  if (p.missing_rate.empty()) {
    p.missing_rate.assign(L, 0.5);
    p.missing_rate.back() = 0.9;
  }
  p.seed = stream_seed(c.seed, "synth", 0);
  SyntheticData data = generate_synthetic(tree, p);

  std::vector<std::string> ids;
  for (std::size_t m = 1; m <= o.n_traits; ++m) ids.push_back(std::to_string(m));
  if (!o.transformed) {
    for (auto& level : data.levels) {
      std::vector<double> raw;
      for (const auto& e : level.entries()) raw.push_back(std::exp(e.value * o.raw_ls + o.raw_lm));
      level = level.with_values(raw);
    }
  }

  const fs::path out(c.out);
  io::write_taxonomy(out / "taxonomy.csv", tree);
  io::write_traits(out / "traits.csv", data.levels.back(), tree, ids);
  io::write_upper_levels(out / "upper_levels.csv", std::span(data.levels).first(L - 1), tree, ids);
  io::write_factors(out / "truth_factors.txt", data.truth);
  std::cerr << tree.leaf_count() << " leaves, " << data.levels.back().size() << " observed leaf entries\n";
  return {{"taxonomy.csv", "traits.csv", "upper_levels.csv", "truth_factors.txt"}, {}};
}

// ---------------------------------------------------------------------------

CommandResult cmd_train(const CommonOptions& c, const HyperOptions& hopt, const TrainOptions& o) {
  CommandResult result;
  const MethodKind method = parse_method(o.method);
  const Inputs in = load_inputs(c, o.upper, result);
  const TaxonomyTree& tree = in.tree;
  const auto& ids = in.traits.trait_ids;

  std::string levels = o.levels;
  if (levels.empty()) levels = method == MethodKind::Pmf ? "none" : "all";
  const int p = parse_levels(tree, levels);
  require(method != MethodKind::Pmf || p == 0, "pmf uses no hierarchy; pass --levels none");

  SplitBundle bundle;
  if (o.split == "none") {
    bundle.train = in.traits.matrix;
    if (!o.validation.empty()) {
      bundle.validation = io::read_traits(o.validation, tree, ids).matrix;
      result.inputs["validation"] = o.validation;
    } else {
      bundle.validation = SparseTraitMatrix(tree.depth(), tree.leaf_count(), ids.size(), {});
    }
    bundle.test = SparseTraitMatrix(tree.depth(), tree.leaf_count(), ids.size(), {});
  } else {
    require(o.validation.empty(), "--validation needs --split none");
    bundle = make_split(in.traits.matrix, o.split, c.seed);
  }
  const PreparedSplit prep = prepare_split(bundle, !o.transformed, in.upper);
  report_dropped(prep, ids);
  const TaxonomyTree sub = tree.truncated(p);
  const fs::path out(c.out);

  Json model;
  model["method"] = std::string(to_string(method));
  model["levels"] = levels_label(tree, p);
  model["upper_levels"] = p;
  model["taxonomy_fnv1a64"] = io::file_hash(c.taxonomy);
  model["trait_ids"] = ids;
  model["transformed_input"] = o.transformed;

  std::optional<double> test_rmse;
  if (method == MethodKind::Mean) {
    const MeanTables tables = build_mean_tables(prep.train, sub);
    io::write_mean_tables(out / kMeansFile, tables, sub, ids);
    result.outputs.push_back(kMeansFile);
    if (!prep.test.empty()) {
      std::vector<TruthPrediction> pairs;
      for (const auto& e : prep.test.entries()) {
        pairs.push_back({e.value, mean_predict(tables, sub, e.row, e.col, p)->value});
      }
      test_rmse = rmse(pairs);
    }
  } else {
    const Hyperparams h = train_hyper(hopt, c.seed);
    const TrainResult r = train_model(method, prep.train, prep.validation, sub, h, prep.upper);
    io::write_factors(out / kFactorsFile, r.factors);
    io::write_trace(out / kTraceFile, r.trace);
    result.outputs.push_back(kFactorsFile);
    result.outputs.push_back(kTraceFile);
    model["k"] = h.k;
    model["best_pass"] = r.trace.best_pass;
    model["stop_reason"] = std::string(to_string(r.trace.stop_reason));
    if (!prep.test.empty()) test_rmse = leaf_rmse(r.factors, prep.test);
  }
  if (prep.stats) {
    io::write_stats(out / kStatsFile, *prep.stats, ids);
    result.outputs.push_back(kStatsFile);
  }
  model["train_entries"] = prep.train.size();
  model["test_entries"] = prep.test.size();
  if (test_rmse) {
    model["test_rmse"] = io::format_double(*test_rmse);
    std::cout << "test RMSE " << io::format_double(*test_rmse) << " over " << prep.test.size() << " entries\n";
  }
  io::atomic_write(out / kModelFile, model.dump(2) + "\n");
  result.outputs.push_back(kModelFile);
  return result;
}

// ---------------------------------------------------------------------------

CommandResult cmd_predict(const CommonOptions& c, const PredictOptions& o) {
  CommandResult result;
  require(!o.model.empty(), "--model is required");
  require(!c.taxonomy.empty(), "--taxonomy is required");
  require(o.targets.empty() != !o.all_missing, "give exactly one of --targets and --all-missing");
  const fs::path dir(o.model);
  Json model;
  try {
    model = Json::parse(io::read_file(dir / kModelFile));
  } catch (const Json::exception& e) {
    fail(ErrorCode::ParseError, (dir / kModelFile).string() + ": " + e.what());
  }
  result.inputs["model"] = dir / kModelFile;
  result.inputs["taxonomy"] = c.taxonomy;
  if (model.at("taxonomy_fnv1a64").get<std::string>() != io::file_hash(c.taxonomy)) {
    fail(ErrorCode::DimensionMismatch, "taxonomy differs from the one the model was trained with");
  }
  const TaxonomyTree tree = io::read_taxonomy(c.taxonomy);
  const auto ids = model.at("trait_ids").get<std::vector<std::string>>();
  const int p = model.at("upper_levels").get<int>();
  const TaxonomyTree sub = tree.truncated(p);
  const MethodKind method = parse_method(model.at("method").get<std::string>());

  std::vector<io::PredictionRow> rows;
  if (o.all_missing) {
    require(!c.traits.empty(), "--all-missing needs --traits");
    const auto observed = io::read_traits(c.traits, tree, ids).matrix;
    result.inputs["traits"] = c.traits;
    for (std::size_t r = 0; r < tree.leaf_count(); ++r) {
      for (std::size_t col = 0; col < ids.size(); ++col) {
        if (!observed.find(r, col)) rows.push_back({r, col, std::nullopt, std::nullopt});
      }
    }
  } else {
    const auto csv = io::read_csv(o.targets);
    result.inputs["targets"] = o.targets;
    if (csv.empty() || csv.front().fields != std::vector<std::string>{"leaf_id", "trait_id"}) {
      fail(ErrorCode::ParseError, o.targets + ": expected header 'leaf_id,trait_id'");
    }
    for (std::size_t i = 1; i < csv.size(); ++i) {
      const auto& f = csv[i].fields;
      const std::string where = o.targets + ":" + std::to_string(csv[i].line) + ": ";
      if (f.size() != 2) fail(ErrorCode::ParseError, where + "expected 2 fields");
      const std::size_t r = tree.find(tree.depth(), f[0]);
      if (r == tree.leaf_count()) fail(ErrorCode::ParseError, where + "unknown leaf '" + f[0] + "'");
      std::size_t col = ids.size();
      for (std::size_t k = 0; k < ids.size(); ++k) {
        if (ids[k] == f[1]) col = k;
      }
      if (col == ids.size()) fail(ErrorCode::ParseError, where + "unknown trait '" + f[1] + "'");
      rows.push_back({r, col, std::nullopt, std::nullopt});
    }
  }

  if (method == MethodKind::Mean) {
    const MeanTables tables = io::read_mean_tables(dir / kMeansFile, sub, ids);
    result.inputs["means"] = dir / kMeansFile;
    for (auto& row : rows) {
      if (auto mp = mean_predict(tables, sub, row.row, row.col, p)) {
        row.value = mp->value;
        row.level_used = mp->level_used;
      }
    }
  } else {
    const FactorSet f = io::read_factors(dir / kFactorsFile);
    result.inputs["factors"] = dir / kFactorsFile;
    if (f.depth() != sub.depth() || f.U.back().rows() != sub.leaf_count() || f.n_cols() != ids.size()) {
      fail(ErrorCode::DimensionMismatch, "factor file does not match the model's tree and traits");
    }
    for (auto& row : rows) row.value = predict(f, row.row, row.col);
  }

  const bool raw_model = !model.at("transformed_input").get<bool>();
  if (raw_model && !o.transformed) {
    const TraitStats stats = io::read_stats(dir / kStatsFile, ids);
    result.inputs["stats"] = dir / kStatsFile;
    for (auto& row : rows) {
      if (!row.value) continue;
      if (stats.usable(row.col)) row.value = inverse_value(*row.value, stats, row.col);
      else row.value.reset();
    }
  }
  std::size_t missing = 0;
  for (const auto& row : rows) missing += row.value ? 0 : 1;
  io::write_predictions(fs::path(c.out) / "predictions.csv", rows, tree, ids, method == MethodKind::Mean);
  std::cerr << rows.size() << " cells, " << missing << " without a prediction\n";
  result.outputs.push_back("predictions.csv");
  return result;
}

// ---------------------------------------------------------------------------

CommandResult cmd_evaluate(const CommonOptions& c, const HyperOptions& hopt, const EvaluateOptions& o) {
  CommandResult result;
  const Inputs in = load_inputs(c, o.upper, result);
  const TaxonomyTree& tree = in.tree;
  const auto& ids = in.traits.trait_ids;
  const fs::path out(c.out);

  if (o.mode == "ablation") {
    AblationConfig cfg;
    for (const auto& m : o.methods) cfg.methods.push_back(parse_method(m));
    if (o.levels_list.empty()) {
      for (int p = 0; p < tree.depth(); ++p) cfg.upper_levels.push_back(p);
    } else {
      for (const auto& l : o.levels_list) cfg.upper_levels.push_back(parse_levels(tree, l));
    }
    cfg.repeats = o.repeats;
    cfg.jobs = o.jobs;
    cfg.seed = c.seed;
    cfg.hyper = hopt.resolve(c.seed);
    cfg.transform_raw = !o.transformed;
    cfg.upper_data = in.upper;
    const EvaluationReport rep = run_ablation(in.traits.matrix, tree, cfg);
    io::write_report(out / "report.tsv", rep.level_ablation);
    result.outputs.push_back("report.tsv");
    for (const auto& cell : rep.level_ablation) {
      std::cout << cell.levels << "\t" << to_string(cell.method) << "\t" << io::format_double(cell.rmse_mean) << " +- "
                << io::format_double(cell.rmse_std) << "\n";
    }
  } else if (o.mode == "ab_split") {
    const EvaluationReport rep =
        run_ab_analysis(in.traits.matrix, tree, hopt.resolve(c.seed), c.seed, !o.transformed, in.upper);
    std::string text = "trait_id\tpart\tcount\trmse_mean\trmse_hpmf\tdifference\n";
    for (auto [name, part] : {std::pair{"A", &rep.part_a}, {"B", &rep.part_b}}) {
      for (const auto& [col, st] : *part) {
        text += ids[col] + "\t" + name + "\t" + std::to_string(st.count) + "\t" + io::format_double(st.rmse_mean) +
                "\t" + io::format_double(st.rmse_hpmf) + "\t" + io::format_double(st.rmse_mean - st.rmse_hpmf) + "\n";
      }
    }
    io::atomic_write(out / "ab_split.tsv", text);
    result.outputs.push_back("ab_split.tsv");
    std::cout << "overall HPMF test RMSE " << io::format_double(rep.overall_rmse) << "\n";
  } else if (o.mode == "correlation") {
    require(!o.trait_i.empty() && !o.trait_j.empty(), "correlation mode needs --trait-i and --trait-j");
    const std::size_t ci = trait_column(ids, o.trait_i);
    const std::size_t cj = trait_column(ids, o.trait_j);
    const SplitBundle bundle = make_split(in.traits.matrix, "random", c.seed);
    const PreparedSplit prep = prepare_split(bundle, !o.transformed, in.upper);
    report_dropped(prep, ids);
    const TrainResult r = train_model(MethodKind::Hpmf, prep.train, prep.validation, tree, train_hyper(hopt, c.seed),
                                      prep.upper);
    SparseTraitMatrix truth = in.traits.matrix;
    if (prep.stats) truth = apply_transform(keep_transformable(truth, *prep.stats), *prep.stats);
    const CorrelationReport rep = correlation_report(truth, predict_entries(r.factors, truth), ci, cj);
    io::write_correlation(out / "correlation.csv", rep, tree);
    result.outputs.push_back("correlation.csv");
    auto describe = [](const std::string& id) {
      const auto name = trait_catalog_name(id);
      return name.empty() ? id : id + " (" + std::string(name) + ")";
    };
    std::cout << describe(o.trait_i) << " vs " << describe(o.trait_j) << ": pearson_true "
              << io::format_double(rep.pearson_true) << ", pearson_pred " << io::format_double(rep.pearson_pred)
              << "\n";
  } else if (o.mode == "scatter") {
    require(!o.trait.empty(), "scatter mode needs --trait");
    const std::size_t col = trait_column(ids, o.trait);
    const SplitBundle bundle = make_split(in.traits.matrix, "per_plant", c.seed);
    const PreparedSplit prep = prepare_split(bundle, !o.transformed, in.upper);
    report_dropped(prep, ids);
    const TrainResult r = train_model(MethodKind::Hpmf, prep.train, prep.validation, tree, train_hyper(hopt, c.seed),
                                      prep.upper);
    const auto rows = scatter_export(prep.test, predict_entries(r.factors, prep.test), col);
    io::write_scatter(out / "scatter.csv", rows, tree);
    result.outputs.push_back("scatter.csv");
  } else {
    throw UsageError("unknown mode '" + o.mode + "'");
  }
  return result;
}

}  // namespace hpmf::cli
