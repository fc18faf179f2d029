#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "native/imbalance.hpp"
#include "native/synth.hpp"
#include "run_config.hpp"

namespace native::cli {

// Each command throws ConfigError, DataError or NumericError; main() maps
// them onto exit codes 2, 3 and 4.

// Trains, evaluates on the test split and writes into cfg.out_dir:
// config.toml, checkpoint/, losses.csv, metrics.json.
void cmd_train(const RunConfig& cfg, std::ostream& log);

struct EvalArgs {
  std::filesystem::path model;  // run directory or checkpoint directory
  std::filesystem::path data;   // defaults to the run's data_dir
  std::filesystem::path out;    // defaults to the run directory
  std::string split = "test";
  bool groups = false;
  std::size_t threads = 1;
};
void cmd_eval(const EvalArgs& args, std::ostream& log);

struct PerturbArgs {
  std::filesystem::path data;
  std::filesystem::path out;
  double eta = 0.0;
  std::string level = "entity";
  std::uint64_t seed = 0;
};
void cmd_perturb(const PerturbArgs& args, std::ostream& log);

struct ReportArgs {
  std::filesystem::path model;
  std::filesystem::path data;
  std::filesystem::path out;
  std::size_t sample = 1000;  // training triples in the weight summary
  std::uint64_t seed = 0;
};
void cmd_report(const ReportArgs& args, std::ostream& log);

struct SynthArgs {
  SynthSpec spec;
  std::string modalities;  // "name:dim,..."; empty keeps the default pair
  std::filesystem::path out;
};
void cmd_gen_synth(const SynthArgs& args, std::ostream& log);

}  // namespace native::cli
