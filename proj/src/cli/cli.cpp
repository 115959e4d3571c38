#include "hpmf/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <functional>
#include <iostream>
#include <sstream>

#include "commands.hpp"
#include "hpmf/error.hpp"
#include "hpmf/io.hpp"
#include "hpmf/kernels.hpp"

namespace hpmf::cli {

namespace {

using Json = nlohmann::ordered_json;

std::string to_text(const std::string& v) { return v; }
std::string to_text(bool v) { return v ? "true" : "false"; }
std::string to_text(double v) { return io::format_double(v); }
template <class T>
  requires std::is_integral_v<T>
std::string to_text(T v) {
  return std::to_string(v);
}
template <class T>
std::string to_text(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + to_text(v[i]);
  return out;
}

// Options of one subcommand with a way to read back their resolved values.
class Registry {
 public:
  explicit Registry(CLI::App* app) : app_(app) {}

  template <class T>
  CLI::Option* add(const std::string& name, T& var, const std::string& desc) {
    CLI::Option* o = app_->add_option("--" + name, var, desc);
    if constexpr (requires { var.begin(); } && !std::is_same_v<T, std::string>) o->delimiter(',');
    entries_.emplace_back(name, [&var] { return to_text(var); });
    return o;
  }

  CLI::Option* flag(const std::string& name, bool& var, const std::string& desc) {
    CLI::Option* o = app_->add_flag("--" + name, var, desc);
    entries_.emplace_back(name, [&var] { return to_text(var); });
    return o;
  }

  CLI::App* app() const { return app_; }

  Json resolved() const {
    Json j = Json::object();
    for (const auto& [name, get] : entries_) {
      if (name != "config") j[name] = get();
    }
    return j;
  }

 private:
  CLI::App* app_;
  std::vector<std::pair<std::string, std::function<std::string()>>> entries_;
};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// `key = value` lines; a value from the file only fills options not given on
// the command line.
void apply_config(CLI::App* sub, const std::string& path) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw UsageError(path + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    for (char& ch : key) {
      if (ch == '_') ch = '-';
    }
    CLI::Option* opt = key == "config" ? nullptr : sub->get_option_no_throw("--" + key);
    if (opt == nullptr) throw UsageError(path + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
    if (opt->count() > 0) continue;
    opt->add_result(value);
    opt->run_callback();
  }
}

void add_common(Registry& r, CommonOptions& c, bool inputs) {
  if (inputs) {
    r.add("taxonomy", c.taxonomy, "taxonomy CSV");
    r.add("traits", c.traits, "trait CSV (long form)");
  }
  r.add("seed", c.seed, "top-level random seed");
  r.add("config", c.config, "key = value config file");
  r.add("out", c.out, "output directory");
  r.add("kernel", c.kernel, "vector kernel backend (scalar, avx2, neon)");
}

void add_hyper(Registry& r, HyperOptions& h) {
  r.add("k", h.k, "latent dimension");
  r.add("lambda-u", h.lambda_u, "row prior weight");
  r.add("lambda-v", h.lambda_v, "column prior weight");
  r.add("lr", h.lr, "SGD learning rate");
  r.add("epochs", h.epochs, "SGD epochs per level update");
  r.add("passes", h.passes, "maximum number of top-down/bottom-up passes");
  r.add("patience", h.patience, "passes without validation improvement before stopping");
  r.add("init-scale", h.init_scale, "spread of the random initialization");
}

void absolutize(std::string& p) {
  if (!p.empty()) p = fs::absolute(p).lexically_normal().string();
}

void write_manifest(const std::string& command, const Registry& reg, const CommonOptions& c,
                    const CommandResult& result) {
  Json m;
  m["artifact"] = "hpmf";
  m["version"] = std::string(kVersion);
  m["command"] = command;
  m["seed"] = c.seed;
  m["kernel"] = std::string(kernels::active().name);
  m["config"] = reg.resolved();
  Json inputs = Json::object();
  for (const auto& [label, path] : result.inputs) {
    inputs[label] = {{"path", path.string()}, {"fnv1a64", io::file_hash(path)}};
  }
  m["inputs"] = inputs;
  Json outputs = Json::object();
  for (const auto& name : result.outputs) outputs[name] = io::file_hash(fs::path(c.out) / name);
  m["outputs"] = outputs;
  io::atomic_write(fs::path(c.out) / "manifest.json", m.dump(2) + "\n");
}

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::BadRate:
    case ErrorCode::BadFractions:
      return kUsageError;
    case ErrorCode::NonFiniteUpdate:
      return kNumericError;
    default:
      return kDataError;
  }
}

// Command line that reproduces a manifest's run.
std::vector<std::string> rerun_args(const Json& m, const std::string& program, const std::string& out_override) {
  std::vector<std::string> args{program, m.at("command").get<std::string>()};
  for (const auto& [key, value] : m.at("config").items()) {
    std::string v = value.get<std::string>();
    if (key == "out" && !out_override.empty()) v = out_override;
    if (v == "false" || v.empty()) continue;
    args.push_back("--" + key);
    if (v != "true") args.push_back(v);
  }
  return args;
}

int run_rerun(const std::string& program, const std::string& manifest_path, const std::string& out) {
  Json m;
  try {
    m = Json::parse(io::read_file(manifest_path));
    for (const auto& [label, entry] : m.at("inputs").items()) {
      const std::string path = entry.at("path").get<std::string>();
      if (io::file_hash(path) != entry.at("fnv1a64").get<std::string>()) {
        std::cerr << "error: input '" << label << "' (" << path << ") changed since the recorded run\n";
        return kDataError;
      }
    }
  } catch (const Json::exception& e) {
    std::cerr << "error: bad manifest " << manifest_path << ": " << e.what() << "\n";
    return kDataError;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  }
  const auto args = rerun_args(m, program, out);
  return run(args);
}

}  // namespace

Hyperparams HyperOptions::resolve(std::uint64_t seed) const {
  Hyperparams h;
  h.k = k;
  h.lambda_u = lambda_u;
  h.lambda_v = lambda_v;
  h.learning_rate = lr;
  h.epochs_per_level = epochs;
  h.max_passes = passes;
  h.patience = patience;
  h.init_scale = init_scale;
  h.seed = seed;
  h.validate();
  return h;
}

int run(std::span<const std::string> args) {
  CLI::App app{"Hierarchical matrix factorization for gap-filling sparse trait matrices", "hpmf"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  CommonOptions common;
  HyperOptions hyper;
  SynthOptions synth;
  TrainOptions train;
  PredictOptions predict;
  EvaluateOptions evaluate;

  CLI::App* s_synth = app.add_subcommand("synth", "sample a synthetic hierarchy and trait matrix");
  Registry r_synth(s_synth);
  add_common(r_synth, common, false);
  r_synth.add("branching", synth.branching, "children per node, top level first");
  r_synth.add("level-names", synth.level_names, "names of the ancestor levels");
  r_synth.add("n-traits", synth.n_traits, "number of trait columns");
  r_synth.add("k", synth.k, "latent dimension of the generating model");
  r_synth.add("sigma-u", synth.sigma_u, "row factor spread per level");
  r_synth.add("sigma-v", synth.sigma_v, "column factor spread per level");
  r_synth.add("sigma", synth.sigma, "observation noise");
  r_synth.add("missing-rates", synth.missing_rates, "missing rate per level, top first");
  r_synth.flag("transformed", synth.transformed, "write values in transformed (z) space");
  r_synth.add("raw-lm", synth.raw_lm, "log-mean used to map values to raw units");
  r_synth.add("raw-ls", synth.raw_ls, "log-std used to map values to raw units");

  CLI::App* s_train = app.add_subcommand("train", "fit one method and write the model");
  Registry r_train(s_train);
  add_common(r_train, common, true);
  add_hyper(r_train, hyper);
  r_train.add("method", train.method, "mean, pmf, lpmf, hpmf or hrpmf");
  r_train.add("levels", train.levels, "kept ancestor levels: none, a '+'-joined prefix, or all");
  r_train.add("upper", train.upper, "observed upper-level matrices instead of aggregated leaves");
  r_train.flag("transformed", train.transformed, "trait values are already transformed");
  r_train.add("split", train.split, "per_plant, random or none");
  r_train.add("validation", train.validation, "validation trait CSV (with --split none)");

  CLI::App* s_predict = app.add_subcommand("predict", "predict cells with a trained model");
  Registry r_predict(s_predict);
  add_common(r_predict, common, true);
  r_predict.add("model", predict.model, "model directory written by train");
  r_predict.add("targets", predict.targets, "CSV of leaf_id,trait_id cells to predict");
  r_predict.flag("all-missing", predict.all_missing, "predict every cell absent from --traits");
  r_predict.flag("transformed", predict.transformed, "skip the inverse transform");

  CLI::App* s_eval = app.add_subcommand("evaluate", "run an evaluation experiment");
  Registry r_eval(s_eval);
  add_common(r_eval, common, true);
  add_hyper(r_eval, hyper);
  r_eval.add("mode", evaluate.mode, "ablation, ab_split, correlation or scatter");
  r_eval.add("methods", evaluate.methods, "methods of the ablation");
  r_eval.add("levels-list", evaluate.levels_list, "level prefixes of the ablation (default: all)");
  r_eval.add("repeats", evaluate.repeats, "number of repeated splits");
  r_eval.add("jobs", evaluate.jobs, "worker threads for ablation cells");
  r_eval.add("trait", evaluate.trait, "trait id for scatter mode");
  r_eval.add("trait-i", evaluate.trait_i, "first trait id for correlation mode");
  r_eval.add("trait-j", evaluate.trait_j, "second trait id for correlation mode");
  r_eval.add("upper", evaluate.upper, "observed upper-level matrices instead of aggregated leaves");
  r_eval.flag("transformed", evaluate.transformed, "trait values are already transformed");

  CLI::App* s_rerun = app.add_subcommand("rerun", "repeat a run from its manifest");
  std::string manifest_path;
  std::string rerun_out;
  s_rerun->add_option("--manifest", manifest_path, "manifest.json of the run")->required();
  s_rerun->add_option("--out", rerun_out, "output directory (default: the recorded one)");

  const std::string program = args.empty() ? "hpmf" : args.front();
  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    if (!rev.empty()) rev.pop_back();
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsageError;
  }

  if (s_rerun->parsed()) return run_rerun(program, manifest_path, rerun_out);

  try {
    Registry* reg = nullptr;
    std::string command;
    for (auto [sub, r] : {std::pair{s_synth, &r_synth}, {s_train, &r_train}, {s_predict, &r_predict},
                          {s_eval, &r_eval}}) {
      if (sub->parsed()) {
        reg = r;
        command = sub->get_name();
      }
    }
    if (!common.config.empty()) apply_config(reg->app(), common.config);
    if (!common.kernel.empty() && !kernels::select(common.kernel)) {
      throw UsageError("kernel '" + common.kernel + "' is not available");
    }
    common.kernel = std::string(kernels::active().name);
    for (std::string* p : {&common.taxonomy, &common.traits, &common.out, &train.upper, &train.validation,
                           &predict.model, &predict.targets, &evaluate.upper}) {
      absolutize(*p);
    }
    // Inputs are recorded by path only, never by config file.
    common.config.clear();

    CommandResult result;
    if (command == "synth") result = cmd_synth(common, synth);
    else if (command == "train") result = cmd_train(common, hyper, train);
    else if (command == "predict") result = cmd_predict(common, predict);
    else result = cmd_evaluate(common, hyper, evaluate);
    write_manifest(command, *reg, common, result);
    return kOk;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  }
}

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run(args);
}

}  // namespace hpmf::cli
