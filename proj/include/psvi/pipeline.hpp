#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "psvi/model.hpp"
#include "psvi/synth.hpp"

namespace psvi::pipeline {

// Everything a run needs, loadable from a JSON file. Thresholds and mode
// switches are all config-visible so a run's choices are auditable from its
// manifest.
struct Config {
  // Inputs.
  std::string outage_csv;
  std::string customer_csv;
  std::string nri_csv;
  std::string energy_csv;                           // state,solar_pct,wind_pct
  std::map<std::string, std::string> group_csvs;    // scheme -> fips,label file
  std::string urban_form_csv;                       // optional: fips + structure features

  // Analysis period (inclusive years).
  int start_year = 2014;
  int end_year = 2023;

  // Event and feature thresholds.
  double event_rate_threshold = 0.001;
  double large_event_rate = 0.05;
  double long_event_hours = 12.0;
  int gap_tolerance = 1;
  bool cum_affected_sample_sum = false;

  // Model settings. When `use_search` is false the fixed hyperparameters are
  // used as-is; otherwise random search over `search_space` picks them.
  model::Hyperparams hyperparams;
  bool use_search = false;
  model::SearchSpace search_space;
  int search_trials = 20;
  int cv_folds = 10;
  double test_fraction = 0.2;
  int smote_k = 5;
  bool smote_undersample = false;

  // Index settings.
  std::string weight_mode = "signed";
  bool rescale_values = false;
  bool annual_reuse_decade_weights = false;

  // Run settings.
  std::uint64_t seed = 42;
  std::string out_dir = "out";
  int threads = 0;  // 0 -> hardware concurrency
  int shards = 0;   // 0 -> auto from input size; county-partitioned passes

  // Synthetic scenario for the synth subcommand.
  std::optional<synth::ScenarioSpec> scenario;

  nlohmann::json to_json() const;
  static Config from_json(const nlohmann::json& j);
  static Config load(const std::string& path);

  int effective_threads() const;
};

// Exit codes per the external contract.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitMissingInput = 2;
inline constexpr int kExitSchema = 3;
inline constexpr int kExitInvariant = 4;

extern const std::vector<std::string> kSubcommands;

// Runs one subcommand (or `all`). Writes outputs plus run_manifest.json under
// the config's out_dir; returns the exit code. Errors are logged to `log`.
int run(const std::string& subcommand, const Config& config, std::ostream& log);

std::string config_hash(const Config& config);

}  // namespace psvi::pipeline
