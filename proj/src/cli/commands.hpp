#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "hpmf/factorization.hpp"

namespace hpmf::cli {

namespace fs = std::filesystem;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonOptions {
  std::string taxonomy;
  std::string traits;
  std::uint64_t seed = 0;
  std::string config;
  std::string out = "out";
  std::string kernel;
};

struct HyperOptions {
  std::size_t k = 15;
  double lambda_u = 0.1;
  double lambda_v = 0.1;
  double lr = 0.02;
  int epochs = 50;
  int passes = 5;
  int patience = 5;
  double init_scale = 0.01;

  Hyperparams resolve(std::uint64_t seed) const;
};

struct SynthOptions {
  std::vector<int> branching{3, 4, 5, 5, 4};
  std::vector<std::string> level_names;
  std::size_t n_traits = 17;
  std::size_t k = 5;
  double sigma_u = 0.3;
  double sigma_v = 0.3;
  double sigma = 0.1;
  std::vector<double> missing_rates;
  bool transformed = false;
  double raw_lm = 0.0;
  double raw_ls = 1.0;
};

struct TrainOptions {
  std::string method = "hpmf";
  std::string levels;
  std::string upper;
  bool transformed = false;
  std::string split = "per_plant";
  std::string validation;
};

struct PredictOptions {
  std::string model;
  std::string targets;
  bool all_missing = false;
  bool transformed = false;
};

struct EvaluateOptions {
  std::string mode = "ablation";
  std::vector<std::string> methods{"mean", "pmf", "lpmf", "hrpmf", "hpmf"};
  std::vector<std::string> levels_list;
  int repeats = 5;
  int jobs = 1;
  std::string trait;
  std::string trait_i;
  std::string trait_j;
  std::string upper;
  bool transformed = false;
};

// Files written by a command, relative to the output directory, and the
// input files it read (label -> path).
struct CommandResult {
  std::vector<std::string> outputs;
  std::map<std::string, fs::path> inputs;
};

CommandResult cmd_synth(const CommonOptions& c, const SynthOptions& o);
CommandResult cmd_train(const CommonOptions& c, const HyperOptions& h, const TrainOptions& o);
CommandResult cmd_predict(const CommonOptions& c, const PredictOptions& o);
CommandResult cmd_evaluate(const CommonOptions& c, const HyperOptions& h, const EvaluateOptions& o);

}  // namespace hpmf::cli
