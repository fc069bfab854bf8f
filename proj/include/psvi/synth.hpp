#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "psvi/events.hpp"
#include "psvi/features.hpp"
#include "psvi/ingest.hpp"
#include "psvi/model.hpp"

namespace psvi::synth {

// Deterministic outage scenario. A fixed seed reproduces byte-identical
// output; counties draw independent sub-seeds, so generation order (and
// threading) cannot change the result.
struct ScenarioSpec {
  int counties = 20;
  int start_year = 2014;
  int years = 2;

  double events_per_county_year = 12.0;  // Poisson arrivals
  double duration_mu = 1.1;              // log-hours
  double duration_sigma = 0.9;
  double severity_mu = -3.9;             // log peak rate
  double severity_sigma = 1.0;
  double max_duration_hours = 336.0;

  // Arrival multiplier per calendar month, renormalized to keep the annual
  // mean; all ones means no seasonality.
  std::array<double, 12> seasonal = {1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1};

  double noise_samples_per_year = 40.0;  // below-threshold observations

  std::int64_t customers_min = 500;
  std::int64_t customers_max = 200000;

  double threshold = 0.001;  // must match the extraction the data will face
  int gap_tolerance = 1;

  std::uint64_t seed = 1;

  void validate() const;
  nlohmann::json to_json() const;
  static ScenarioSpec from_json(const nlohmann::json& j);
};

struct SyntheticData {
  std::vector<ingest::RecordStream> streams;       // sorted by fips
  std::vector<events::EventSeries> truth_events;   // aligned with streams
  features::FeatureMatrix truth_features;          // whole scenario period
  std::vector<std::int64_t> customers;             // per county, constant over years
  features::Period period;
};

// Samples events, renders them sparsely onto the 15-minute grid (every
// in-event observation strictly above threshold, noise strictly at or below),
// and derives ground truth analytically from the sampled event list rather
// than through the extraction modules.
SyntheticData generate_stream(const ScenarioSpec& spec);

void write_customer_csv(std::ostream& out, const SyntheticData& data, const ScenarioSpec& spec);

// NRI-style categories derived from a latent mix of the ground-truth
// features, so pipelines trained on synthetic scenarios have signal to find.
std::map<std::string, std::string> nri_from_truth(const SyntheticData& data, std::uint64_t seed);
void write_nri_csv(std::ostream& out, const std::map<std::string, std::string>& categories);

struct LabeledSpec {
  std::size_t rows = 1000;
  std::size_t n_features = 14;
  std::vector<std::size_t> signal_features = {0, 4, 7};
  double signal_strength = 4.0;
  std::uint64_t seed = 1;
};

// Features uniform on [0,1]; labels from a logistic model over the signal
// subset. Zero strength makes labels independent coin flips.
model::LabeledDataset generate_labeled(const LabeledSpec& spec);

}  // namespace psvi::synth
