#include "hpmf/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <system_error>
#include <unordered_map>

#include "hpmf/error.hpp"
#include "hpmf/rng.hpp"

namespace hpmf::io {

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  std::string_view t = s;
  if (!t.empty() && t.front() == '+') t.remove_prefix(1);
  double x = 0.0;
  auto res = std::from_chars(t.data(), t.data() + t.size(), x);
  if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    fail(ErrorCode::ParseError, "not a number: '" + std::string(s) + "'");
  }
  return x;
}

std::uint64_t parse_uint(std::string_view s) {
  std::uint64_t x = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    fail(ErrorCode::ParseError, "not a non-negative integer: '" + std::string(s) + "'");
  }
  return x;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void atomic_write(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) fail(ErrorCode::IoError, "cannot create " + path.parent_path().string());
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::IoError, "cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) fail(ErrorCode::IoError, "write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) fail(ErrorCode::IoError, "cannot rename " + tmp.string() + " to " + path.string());
}

std::string file_hash(const fs::path& path) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(read_file(path))));
  return buf;
}

std::vector<CsvRow> read_csv(const fs::path& path, char sep) {
  const std::string text = read_file(path);
  std::vector<CsvRow> rows;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    CsvRow row{line_no, {}};
    std::size_t start = 0;
    while (true) {
      const std::size_t cut = line.find(sep, start);
      row.fields.emplace_back(line.substr(start, cut == std::string_view::npos ? std::string_view::npos : cut - start));
      if (cut == std::string_view::npos) break;
      start = cut + 1;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

[[noreturn]] void parse_fail(const fs::path& path, std::size_t line, const std::string& what) {
  fail(ErrorCode::ParseError, path.string() + ":" + std::to_string(line) + ": " + what);
}

bool valid_identifier(std::string_view s) {
  if (s.empty()) return false;
  for (unsigned char c : s) {
    if (!(std::isalnum(c) || c == '_' || c == '.' || c == '-')) return false;
  }
  return true;
}

void expect_header(const fs::path& path, const std::vector<CsvRow>& rows, std::initializer_list<std::string_view> names) {
  if (rows.empty()) parse_fail(path, 1, "missing header");
  const auto& h = rows.front().fields;
  bool ok = h.size() == names.size();
  std::size_t i = 0;
  for (auto n : names) {
    if (!ok) break;
    ok = h[i++] == n;
  }
  if (!ok) {
    std::string want;
    for (auto n : names) want += (want.empty() ? "" : ",") + std::string(n);
    parse_fail(path, rows.front().line, "expected header '" + want + "'");
  }
}

void expect_fields(const fs::path& path, const CsvRow& row, std::size_t n) {
  if (row.fields.size() != n) {
    parse_fail(path, row.line, "expected " + std::to_string(n) + " fields, got " + std::to_string(row.fields.size()));
  }
}

std::unordered_map<std::string, std::size_t> index_of(std::span<const std::string> ids) {
  std::unordered_map<std::string, std::size_t> out;
  for (std::size_t i = 0; i < ids.size(); ++i) out.emplace(ids[i], i);
  return out;
}

std::string_view convention_name(StdConvention c) { return c == StdConvention::Sample ? "sample" : "population"; }

}  // namespace

TaxonomyTree read_taxonomy(const fs::path& path) {
  const auto rows = read_csv(path);
  if (rows.empty()) parse_fail(path, 1, "missing header");
  const auto& header = rows.front().fields;
  for (const auto& h : header) {
    if (h.empty()) parse_fail(path, rows.front().line, "empty header field");
  }
  std::vector<std::string> names(header.begin() + 1, header.end());
  names.push_back(header.front());
  std::vector<LineageRecord> records;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    expect_fields(path, rows[i], header.size());
    for (const auto& f : rows[i].fields) {
      if (!valid_identifier(f)) parse_fail(path, rows[i].line, "invalid identifier '" + f + "'");
    }
    records.push_back({rows[i].fields.front(), {rows[i].fields.begin() + 1, rows[i].fields.end()}});
  }
  return build_tree(records, std::move(names));
}

void write_taxonomy(const fs::path& path, const TaxonomyTree& tree) {
  const auto& names = tree.level_names();
  std::string out = names.back();
  for (std::size_t l = 0; l + 1 < names.size(); ++l) out += "," + names[l];
  out += '\n';
  for (const auto& r : tree.records()) {
    out += r.leaf;
    for (const auto& a : r.ancestors) out += "," + a;
    out += '\n';
  }
  atomic_write(path, out);
}

TraitTable read_traits(const fs::path& path, const TaxonomyTree& tree,
                       std::optional<std::vector<std::string>> trait_ids) {
  const auto rows = read_csv(path);
  expect_header(path, rows, {"leaf_id", "trait_id", "value"});
  const bool fixed = trait_ids.has_value();
  TraitTable out;
  if (fixed) out.trait_ids = std::move(*trait_ids);
  auto cols = index_of(out.trait_ids);
  const int L = tree.depth();
  std::vector<TraitEntry> entries;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    expect_fields(path, r, 3);
    const std::size_t leaf = tree.find(L, r.fields[0]);
    if (leaf == tree.leaf_count()) parse_fail(path, r.line, "unknown leaf '" + r.fields[0] + "'");
    if (r.fields[1].empty()) parse_fail(path, r.line, "empty trait id");
    auto it = cols.find(r.fields[1]);
    if (it == cols.end()) {
      if (fixed) parse_fail(path, r.line, "unknown trait '" + r.fields[1] + "'");
      it = cols.emplace(r.fields[1], out.trait_ids.size()).first;
      out.trait_ids.push_back(r.fields[1]);
    }
    double v = 0.0;
    try {
      v = parse_double(r.fields[2]);
    } catch (const Error& e) {
      parse_fail(path, r.line, e.what());
    }
    if (!std::isfinite(v)) parse_fail(path, r.line, "non-finite value");
    entries.push_back({leaf, it->second, v});
  }
  try {
    out.matrix = SparseTraitMatrix(L, tree.leaf_count(), out.trait_ids.size(), std::move(entries));
  } catch (const Error& e) {
    fail(e.code(), path.string() + ": " + e.what());
  }
  return out;
}

void write_traits(const fs::path& path, const SparseTraitMatrix& m, const TaxonomyTree& tree,
                  std::span<const std::string> trait_ids) {
  if (trait_ids.size() != m.n_cols()) fail(ErrorCode::DimensionMismatch, "trait id count");
  std::string out = "leaf_id,trait_id,value\n";
  for (const auto& e : m.entries()) {
    out += tree.label(tree.depth(), e.row) + "," + trait_ids[e.col] + "," + format_double(e.value) + "\n";
  }
  atomic_write(path, out);
}

std::vector<SparseTraitMatrix> read_upper_levels(const fs::path& path, const TaxonomyTree& tree,
                                                 std::span<const std::string> trait_ids) {
  const auto rows = read_csv(path);
  expect_header(path, rows, {"level", "node_id", "trait_id", "value"});
  const int L = tree.depth();
  const auto cols = index_of(trait_ids);
  std::vector<std::vector<TraitEntry>> entries(static_cast<std::size_t>(std::max(L - 1, 0)));
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    expect_fields(path, r, 4);
    std::uint64_t level = 0;
    double v = 0.0;
    try {
      level = parse_uint(r.fields[0]);
      v = parse_double(r.fields[3]);
    } catch (const Error& e) {
      parse_fail(path, r.line, e.what());
    }
    if (level < 1 || level >= static_cast<std::uint64_t>(L)) parse_fail(path, r.line, "level out of range");
    const int l = static_cast<int>(level);
    const std::size_t node = tree.find(l, r.fields[1]);
    if (node == tree.nodes_at(l)) parse_fail(path, r.line, "unknown node '" + r.fields[1] + "'");
    auto it = cols.find(r.fields[2]);
    if (it == cols.end()) parse_fail(path, r.line, "unknown trait '" + r.fields[2] + "'");
    entries[l - 1].push_back({node, it->second, v});
  }
  std::vector<SparseTraitMatrix> out;
  for (int l = 1; l < L; ++l) {
    out.emplace_back(l, tree.nodes_at(l), trait_ids.size(), std::move(entries[l - 1]));
  }
  return out;
}

void write_upper_levels(const fs::path& path, std::span<const SparseTraitMatrix> levels, const TaxonomyTree& tree,
                        std::span<const std::string> trait_ids) {
  std::string out = "level,node_id,trait_id,value\n";
  for (const auto& m : levels) {
    if (m.level() >= tree.depth()) continue;
    for (const auto& e : m.entries()) {
      out += std::to_string(m.level()) + "," + tree.label(m.level(), e.row) + "," + trait_ids[e.col] + "," +
             format_double(e.value) + "\n";
    }
  }
  atomic_write(path, out);
}

void write_stats(const fs::path& path, const TraitStats& stats, std::span<const std::string> trait_ids) {
  if (trait_ids.size() != stats.n_cols()) fail(ErrorCode::DimensionMismatch, "trait id count");
  std::string out = "trait_id,lm,ls,std_convention\n";
  for (std::size_t c = 0; c < stats.n_cols(); ++c) {
    out += trait_ids[c] + ",";
    if (stats.usable(c)) out += format_double(stats.lm[c]) + "," + format_double(stats.ls[c]);
    else out += ",";
    out += "," + std::string(convention_name(stats.convention)) + "\n";
  }
  atomic_write(path, out);
}

TraitStats read_stats(const fs::path& path, std::span<const std::string> trait_ids) {
  const auto rows = read_csv(path);
  expect_header(path, rows, {"trait_id", "lm", "ls", "std_convention"});
  const auto cols = index_of(trait_ids);
  TraitStats s;
  const std::size_t M = trait_ids.size();
  s.lm.assign(M, 0.0);
  s.ls.assign(M, 1.0);
  s.present.assign(M, false);
  s.degenerate.assign(M, false);
  bool convention_set = false;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    expect_fields(path, r, 4);
    auto it = cols.find(r.fields[0]);
    if (it == cols.end()) parse_fail(path, r.line, "unknown trait '" + r.fields[0] + "'");
    StdConvention conv;
    if (r.fields[3] == "sample") conv = StdConvention::Sample;
    else if (r.fields[3] == "population") conv = StdConvention::Population;
    else parse_fail(path, r.line, "unknown std convention '" + r.fields[3] + "'");
    if (convention_set && conv != s.convention) parse_fail(path, r.line, "mixed std conventions");
    s.convention = conv;
    convention_set = true;
    const std::size_t c = it->second;
    if (r.fields[1].empty() && r.fields[2].empty()) continue;
    try {
      s.lm[c] = parse_double(r.fields[1]);
      s.ls[c] = parse_double(r.fields[2]);
    } catch (const Error& e) {
      parse_fail(path, r.line, e.what());
    }
    if (!(s.ls[c] > 0.0) || !std::isfinite(s.lm[c])) parse_fail(path, r.line, "invalid stats");
    s.present[c] = true;
  }
  return s;
}

std::string serialize_factors(const FactorSet& f) {
  std::string out;
  auto block = [&](int level, char side, const FactorMatrix& m) {
    out += std::to_string(level) + "," + side + "," + std::to_string(f.k) + "," + std::to_string(m.rows()) + "\n";
    for (std::size_t i = 0; i < m.rows(); ++i) {
      const double* v = m.vec(i);
      for (std::size_t j = 0; j < f.k; ++j) {
        if (j) out += ' ';
        out += format_double(v[j]);
      }
      out += '\n';
    }
  };
  for (int l = 0; l <= f.depth(); ++l) {
    block(l, 'U', f.U[l]);
    block(l, 'V', f.V[l]);
  }
  return out;
}

FactorSet deserialize_factors(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    lines.push_back(text.substr(pos, end - pos));
    pos = end + 1;
  }
  auto bad = [](std::size_t line, const std::string& what) -> void {
    fail(ErrorCode::ParseError, "factor file line " + std::to_string(line + 1) + ": " + what);
  };
  FactorSet f;
  std::size_t i = 0;
  bool have_k = false;
  while (i < lines.size()) {
    if (lines[i].empty()) {
      ++i;
      continue;
    }
    std::vector<std::string_view> h;
    std::size_t s = 0;
    while (true) {
      std::size_t c = lines[i].find(',', s);
      h.push_back(lines[i].substr(s, c == std::string_view::npos ? std::string_view::npos : c - s));
      if (c == std::string_view::npos) break;
      s = c + 1;
    }
    if (h.size() != 4 || (h[1] != "U" && h[1] != "V")) bad(i, "bad block header");
    std::size_t level = 0, k = 0, n = 0;
    try {
      level = parse_uint(h[0]);
      k = parse_uint(h[2]);
      n = parse_uint(h[3]);
    } catch (const Error& e) {
      bad(i, e.what());
    }
    const bool is_u = h[1] == "U";
    if (!have_k) {
      f.k = k;
      have_k = true;
    }
    if (k != f.k || k == 0) bad(i, "inconsistent latent dimension");
    const std::size_t expected_level = f.U.size() - (is_u ? 0 : 1);
    if (level != expected_level || (is_u && f.U.size() != f.V.size()) || (!is_u && f.U.size() != f.V.size() + 1)) {
      bad(i, "blocks out of order");
    }
    FactorMatrix m(n, k);
    for (std::size_t r = 0; r < n; ++r) {
      ++i;
      if (i >= lines.size()) bad(i, "truncated block");
      std::string_view line = lines[i];
      std::size_t col = 0;
      std::size_t p = 0;
      while (p <= line.size()) {
        std::size_t q = line.find(' ', p);
        if (q == std::string_view::npos) q = line.size();
        if (col >= k) bad(i, "too many values");
        try {
          m.vec(r)[col++] = parse_double(line.substr(p, q - p));
        } catch (const Error& e) {
          bad(i, e.what());
        }
        p = q + 1;
      }
      if (col != k) bad(i, "too few values");
    }
    ++i;
    (is_u ? f.U : f.V).push_back(std::move(m));
  }
  if (f.U.empty() || f.U.size() != f.V.size()) fail(ErrorCode::ParseError, "incomplete factor file");
  if (f.U[0].rows() != 1) fail(ErrorCode::ParseError, "level 0 must hold one row vector");
  for (const auto& v : f.V) {
    if (v.rows() != f.V[0].rows()) fail(ErrorCode::ParseError, "column count differs between levels");
  }
  return f;
}

void write_factors(const fs::path& path, const FactorSet& f) { atomic_write(path, serialize_factors(f)); }

FactorSet read_factors(const fs::path& path) {
  try {
    return deserialize_factors(read_file(path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ParseError) fail(ErrorCode::ParseError, path.string() + ": " + e.what());
    throw;
  }
}

void write_trace(const fs::path& path, const TrainTrace& trace) {
  std::string out = "kind,pass,direction,level,objective,validation_rmse\n";
  for (const auto& s : trace.steps) {
    out += "step," + std::to_string(s.pass) + "," + std::string(to_string(s.direction)) + "," +
           std::to_string(s.level) + "," + format_double(s.objective) + "," + format_double(s.validation_rmse) + "\n";
  }
  for (const auto& p : trace.passes) {
    out += "pass," + std::to_string(p.pass) + ",,," + format_double(p.objective) + "," +
           format_double(p.validation_rmse) + "\n";
  }
  out += "stop," + std::string(to_string(trace.stop_reason)) + "," + std::to_string(trace.best_pass) + "\n";
  atomic_write(path, out);
}

void write_mean_tables(const fs::path& path, const MeanTables& tables, const TaxonomyTree& tree,
                       std::span<const std::string> trait_ids) {
  std::string out = "level,node_id,trait_id,mean,count\n";
  for (int l = 0; l <= tables.max_level(); ++l) {
    const std::size_t nodes = l == 0 ? 1 : tree.nodes_at(l);
    for (std::size_t n = 0; n < nodes; ++n) {
      for (std::size_t c = 0; c < tables.n_cols(); ++c) {
        const auto& cell = tables.at(l, n, c);
        if (cell.count == 0) continue;
        out += std::to_string(l) + "," + (l == 0 ? std::string("*") : tree.label(l, n)) + "," + trait_ids[c] + "," +
               format_double(cell.mean) + "," + std::to_string(cell.count) + "\n";
      }
    }
  }
  atomic_write(path, out);
}

MeanTables read_mean_tables(const fs::path& path, const TaxonomyTree& tree, std::span<const std::string> trait_ids) {
  const auto rows = read_csv(path);
  expect_header(path, rows, {"level", "node_id", "trait_id", "mean", "count"});
  std::vector<std::size_t> sizes{1};
  for (int l = 1; l < tree.depth(); ++l) sizes.push_back(tree.nodes_at(l));
  MeanTables tables(trait_ids.size(), sizes);
  const auto cols = index_of(trait_ids);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    expect_fields(path, r, 5);
    std::uint64_t level = 0, count = 0;
    double mean = 0.0;
    try {
      level = parse_uint(r.fields[0]);
      mean = parse_double(r.fields[3]);
      count = parse_uint(r.fields[4]);
    } catch (const Error& e) {
      parse_fail(path, r.line, e.what());
    }
    if (level >= static_cast<std::uint64_t>(tree.depth())) parse_fail(path, r.line, "level out of range");
    const int l = static_cast<int>(level);
    std::size_t node = 0;
    if (l > 0) {
      node = tree.find(l, r.fields[1]);
      if (node == tree.nodes_at(l)) parse_fail(path, r.line, "unknown node '" + r.fields[1] + "'");
    }
    auto it = cols.find(r.fields[2]);
    if (it == cols.end()) parse_fail(path, r.line, "unknown trait '" + r.fields[2] + "'");
    if (count == 0) parse_fail(path, r.line, "zero count");
    tables.at(l, node, it->second) = {mean, count};
  }
  return tables;
}

void write_report(const fs::path& path, std::span<const AblationCell> cells) {
  std::string out = "levels\tmethod\trmse_mean\trmse_std\trepeats\n";
  for (const auto& c : cells) {
    out += c.levels + "\t" + std::string(to_string(c.method)) + "\t" + format_double(c.rmse_mean) + "\t" +
           format_double(c.rmse_std) + "\t" + std::to_string(c.rmse_per_repeat.size()) + "\n";
  }
  atomic_write(path, out);
}

void write_scatter(const fs::path& path, std::span<const ScatterRow> rows, const TaxonomyTree& tree) {
  std::string out = "row_id,truth,prediction\n";
  for (const auto& r : rows) {
    out += tree.label(tree.depth(), r.row) + "," + format_double(r.truth) + "," + format_double(r.prediction) + "\n";
  }
  atomic_write(path, out);
}

void write_correlation(const fs::path& path, const CorrelationReport& report, const TaxonomyTree& tree) {
  std::string out = "row_id,truth_i,truth_j,pred_i,pred_j\n";
  for (const auto& r : report.rows) {
    out += tree.label(tree.depth(), r.row) + "," + format_double(r.truth_i) + "," + format_double(r.truth_j) + "," +
           format_double(r.pred_i) + "," + format_double(r.pred_j) + "\n";
  }
  out += "pearson_true," + format_double(report.pearson_true) + "\n";
  out += "pearson_pred," + format_double(report.pearson_pred) + "\n";
  atomic_write(path, out);
}

void write_predictions(const fs::path& path, std::span<const PredictionRow> rows, const TaxonomyTree& tree,
                       std::span<const std::string> trait_ids, bool with_level) {
  std::string out = with_level ? "leaf_id,trait_id,prediction,level_used\n" : "leaf_id,trait_id,prediction\n";
  for (const auto& r : rows) {
    out += tree.label(tree.depth(), r.row) + "," + trait_ids[r.col] + ",";
    if (r.value) out += format_double(*r.value);
    if (with_level) {
      out += ",";
      if (r.level_used) out += std::to_string(*r.level_used);
    }
    out += "\n";
  }
  atomic_write(path, out);
}

}  // namespace hpmf::io
