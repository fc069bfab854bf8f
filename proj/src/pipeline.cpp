#include "psvi/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "psvi/analysis.hpp"
#include "psvi/csv.hpp"
#include "psvi/errors.hpp"
#include "psvi/events.hpp"
#include "psvi/explain.hpp"
#include "psvi/features.hpp"
#include "psvi/parallel.hpp"
#include "psvi/rng.hpp"
#include "psvi/scoring.hpp"
#include "psvi/stats.hpp"
#include "psvi/timegrid.hpp"

namespace psvi::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<std::string> kSubcommands = {"ingest", "events", "features", "train", "explain",
                                               "index",  "annual", "analyze",  "synth", "all"};

// --- config ---------------------------------------------------------------

json Config::to_json() const {
  json j;
  j["inputs"] = {{"outage_csv", outage_csv},   {"customer_csv", customer_csv},
                 {"nri_csv", nri_csv},         {"energy_csv", energy_csv},
                 {"group_csvs", group_csvs},   {"urban_form_csv", urban_form_csv}};
  j["period"] = {{"start_year", start_year}, {"end_year", end_year}};
  j["thresholds"] = {{"event_rate", event_rate_threshold},
                     {"large_event_rate", large_event_rate},
                     {"long_event_hours", long_event_hours},
                     {"gap_tolerance", gap_tolerance},
                     {"cum_affected_sample_sum", cum_affected_sample_sum}};
  j["model"] = {{"hyperparams", hyperparams.to_json()},
                {"use_search", use_search},
                {"search_space", search_space.to_json()},
                {"search_trials", search_trials},
                {"cv_folds", cv_folds},
                {"test_fraction", test_fraction},
                {"smote_k", smote_k},
                {"smote_undersample", smote_undersample}};
  j["index"] = {{"weight_mode", weight_mode},
                {"rescale_values", rescale_values},
                {"annual_reuse_decade_weights", annual_reuse_decade_weights}};
  j["run"] = {{"seed", seed}, {"out_dir", out_dir}, {"threads", threads}, {"shards", shards}};
  if (scenario) j["scenario"] = scenario->to_json();
  return j;
}

Config Config::from_json(const json& j) {
  Config c;
  if (j.contains("inputs")) {
    const json& in = j.at("inputs");
    const auto str = [&](const char* key, std::string& out) {
      if (in.contains(key)) out = in.at(key).get<std::string>();
    };
    str("outage_csv", c.outage_csv);
    str("customer_csv", c.customer_csv);
    str("nri_csv", c.nri_csv);
    str("energy_csv", c.energy_csv);
    str("urban_form_csv", c.urban_form_csv);
    if (in.contains("group_csvs"))
      c.group_csvs = in.at("group_csvs").get<std::map<std::string, std::string>>();
  }
  if (j.contains("period")) {
    c.start_year = j.at("period").value("start_year", c.start_year);
    c.end_year = j.at("period").value("end_year", c.end_year);
  }
  if (j.contains("thresholds")) {
    const json& t = j.at("thresholds");
    c.event_rate_threshold = t.value("event_rate", c.event_rate_threshold);
    c.large_event_rate = t.value("large_event_rate", c.large_event_rate);
    c.long_event_hours = t.value("long_event_hours", c.long_event_hours);
    c.gap_tolerance = t.value("gap_tolerance", c.gap_tolerance);
    c.cum_affected_sample_sum = t.value("cum_affected_sample_sum", c.cum_affected_sample_sum);
  }
  if (j.contains("model")) {
    const json& m = j.at("model");
    if (m.contains("hyperparams")) c.hyperparams = model::Hyperparams::from_json(m.at("hyperparams"));
    c.use_search = m.value("use_search", c.use_search);
    if (m.contains("search_space")) c.search_space = model::SearchSpace::from_json(m.at("search_space"));
    c.search_trials = m.value("search_trials", c.search_trials);
    c.cv_folds = m.value("cv_folds", c.cv_folds);
    c.test_fraction = m.value("test_fraction", c.test_fraction);
    c.smote_k = m.value("smote_k", c.smote_k);
    c.smote_undersample = m.value("smote_undersample", c.smote_undersample);
  }
  if (j.contains("index")) {
    const json& i = j.at("index");
    c.weight_mode = i.value("weight_mode", c.weight_mode);
    c.rescale_values = i.value("rescale_values", c.rescale_values);
    c.annual_reuse_decade_weights =
        i.value("annual_reuse_decade_weights", c.annual_reuse_decade_weights);
  }
  if (j.contains("run")) {
    const json& r = j.at("run");
    c.seed = r.value("seed", c.seed);
    c.out_dir = r.value("out_dir", c.out_dir);
    c.threads = r.value("threads", c.threads);
    c.shards = r.value("shards", c.shards);
  }
  if (j.contains("scenario")) c.scenario = synth::ScenarioSpec::from_json(j.at("scenario"));
  if (c.end_year < c.start_year) throw DomainError("config: end_year before start_year");
  explain::weight_mode_from_name(c.weight_mode);  // validates
  return c;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingInputError("config file not found: " + path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw SchemaError("config file " + path + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

int Config::effective_threads() const { return threads > 0 ? threads : hardware_threads(); }

std::string config_hash(const Config& config) {
  const std::string dump = config.to_json().dump();
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (const unsigned char c : dump) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

// --- run bookkeeping --------------------------------------------------------

namespace {

struct StageRecord {
  std::string name;
  std::vector<std::string> outputs;
  std::map<std::string, std::int64_t> rows;
  double seconds = 0.0;
};

class Run {
 public:
  Run(const Config& config, std::ostream& log) : config_(config), log_(log) {
    fs::create_directories(config.out_dir);
  }

  const Config& config() const { return config_; }
  std::ostream& log() { return log_; }

  std::string path(const std::string& name) const { return config_.out_dir + "/" + name; }

  void require_input(const std::string& file, const std::string& what) const {
    if (file.empty()) throw MissingInputError(what + " path not configured");
    if (!fs::exists(file)) throw MissingInputError(what + " not found: " + file);
  }

  std::ofstream open_output(StageRecord& stage, const std::string& name) {
    const std::string p = path(name);
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot write output file: " + p);
    stage.outputs.push_back(name);
    return out;
  }

  void write_json(StageRecord& stage, const std::string& name, const json& j) {
    auto out = open_output(stage, name);
    out << j.dump(2) << '\n';
  }

  StageRecord& begin_stage(const std::string& name) {
    stages_.push_back(StageRecord{name, {}, {}, 0.0});
    start_ = std::chrono::steady_clock::now();
    log_ << "[" << name << "] running\n";
    return stages_.back();
  }

  void end_stage() {
    const auto elapsed = std::chrono::steady_clock::now() - start_;
    stages_.back().seconds = std::chrono::duration<double>(elapsed).count();
    log_ << "[" << stages_.back().name << "] done\n";
  }

  void finalize(const std::string& subcommand) {
    json manifest;
    manifest["subcommand"] = subcommand;
    manifest["config_hash"] = config_hash(config_);
    manifest["seed"] = config_.seed;
    manifest["timings_file"] = "stage_timings.json";
    json stage_list = json::array();
    json timing_list = json::array();
    for (const StageRecord& s : stages_) {
      stage_list.push_back(json{{"name", s.name}, {"outputs", s.outputs}, {"rows", s.rows}});
      timing_list.push_back(json{{"name", s.name}, {"seconds", s.seconds}});
    }
    manifest["stages"] = stage_list;
    {
      std::ofstream out(path("run_manifest.json"), std::ios::binary);
      out << manifest.dump(2) << '\n';
    }
    {
      // Wall-clock timings live beside the manifest so that identical runs
      // still produce byte-identical manifests.
      std::ofstream out(path("stage_timings.json"), std::ios::binary);
      out << json{{"stages", timing_list}}.dump(2) << '\n';
    }
  }

 private:
  Config config_;
  std::ostream& log_;
  std::vector<StageRecord> stages_;
  std::chrono::steady_clock::time_point start_;
};

// Fill in default paths for inputs the synth stage generates, so a config
// with a scenario can run `synth` then `all` unchanged.
Config resolve_inputs(const Config& input) {
  Config c = input;
  const auto fallback = [&](std::string& field, const char* name) {
    if (field.empty()) {
      const std::string candidate = c.out_dir + "/" + name;
      field = candidate;
    }
  };
  if (c.scenario) {
    fallback(c.outage_csv, "outage.csv");
    fallback(c.customer_csv, "customers.csv");
    fallback(c.nri_csv, "nri.csv");
    if (c.energy_csv.empty() && fs::exists(c.out_dir + "/energy.csv"))
      c.energy_csv = c.out_dir + "/energy.csv";
    if (c.group_csvs.empty()) {
      for (const char* scheme : {"urban_rural", "rto", "state"}) {
        const std::string p = c.out_dir + "/groups_" + std::string(scheme) + ".csv";
        if (fs::exists(p)) c.group_csvs[scheme] = p;
      }
    }
  }
  return c;
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

int auto_shards(const Config& config) {
  if (config.shards > 0) return config.shards;
  std::error_code ec;
  const auto size = fs::file_size(config.outage_csv, ec);
  if (ec) return 1;
  constexpr std::uintmax_t kShardBytes = 256ull * 1024 * 1024;
  return static_cast<int>(std::min<std::uintmax_t>((size + kShardBytes - 1) / kShardBytes, 64));
}

// --- shared aggregation -------------------------------------------------------

struct CountyData {
  std::string fips;
  events::EventSeries series;
  std::vector<std::int64_t> month_sums;  // calendar months across the period
};

struct AggregateResult {
  std::vector<CountyData> counties;  // sorted by fips
  std::vector<std::string> excluded_counties;
  ingest::ParseStats stats;
  std::vector<ingest::RejectedRow> rejects;
};

// One or more county-partitioned passes over the outage CSV. Each pass parses
// only its shard of counties, extracts events and monthly totals, then drops
// the raw records, so memory stays bounded by the largest shard.
AggregateResult aggregate_outages(Run& run, const ingest::CustomerBaseTable& base,
                                  bool want_events, bool keep_rejects) {
  const Config& cfg = run.config();
  run.require_input(cfg.outage_csv, "outage CSV");
  const int shards = auto_shards(cfg);
  const features::Period period = features::years_period(cfg.start_year, cfg.end_year);
  const std::int64_t first_month = timegrid::month_index(period.begin);
  const std::size_t n_months =
      static_cast<std::size_t>(timegrid::month_index(period.end - 1) - first_month + 1);

  AggregateResult result;
  for (int shard = 0; shard < shards; ++shard) {
    std::ifstream in(cfg.outage_csv, std::ios::binary);
    if (!in) throw MissingInputError("outage CSV not found: " + cfg.outage_csv);
    ingest::FipsFilter filter;
    if (shards > 1)
      filter = [shard, shards](std::string_view fips) {
        return static_cast<int>(fnv1a(fips) % static_cast<std::uint64_t>(shards)) == shard;
      };
    ingest::ParseResult parsed = ingest::parse_records(in, {}, filter);

    result.stats.total_rows += parsed.stats.total_rows;
    result.stats.accepted += parsed.stats.accepted;
    result.stats.rejected += parsed.stats.rejected;
    result.stats.duplicates_merged += parsed.stats.duplicates_merged;
    result.stats.snapped += parsed.stats.snapped;
    if (keep_rejects)
      result.rejects.insert(result.rejects.end(), parsed.rejects.begin(), parsed.rejects.end());

    const int threads = run.config().effective_threads();
    std::vector<CountyData> shard_counties(parsed.streams.size());
    std::vector<bool> excluded(parsed.streams.size(), false);
    parallel_for(0, parsed.streams.size(), threads, [&](std::size_t i) {
      const ingest::RecordStream& stream = parsed.streams[i];
      if (!base.has_county(stream.fips)) {
        excluded[i] = true;
        return;
      }
      CountyData county;
      county.fips = stream.fips;
      county.month_sums.assign(n_months, 0);
      for (const ingest::RecordSample& s : stream.records) {
        if (!period.contains(s.timestamp)) continue;
        county.month_sums[static_cast<std::size_t>(timegrid::month_index(s.timestamp) -
                                                    first_month)] += s.customers_out;
      }
      if (want_events) {
        std::map<int, std::int64_t> total_cache;
        const events::YearTotals totals = [&base, &stream, &total_cache](int year) {
          const auto it = total_cache.find(year);
          if (it != total_cache.end()) return it->second;
          const std::int64_t t = base.customers_total(stream.fips, year);
          total_cache.emplace(year, t);
          return t;
        };
        county.series = events::extract_events(
            stream, totals, {run.config().event_rate_threshold, run.config().gap_tolerance});
      } else {
        county.series.fips = stream.fips;
      }
      shard_counties[i] = std::move(county);
    });
    for (std::size_t i = 0; i < shard_counties.size(); ++i) {
      if (excluded[i])
        result.excluded_counties.push_back(parsed.streams[i].fips);
      else
        result.counties.push_back(std::move(shard_counties[i]));
    }
  }
  std::sort(result.counties.begin(), result.counties.end(),
            [](const CountyData& a, const CountyData& b) { return a.fips < b.fips; });
  std::sort(result.excluded_counties.begin(), result.excluded_counties.end());
  return result;
}

ingest::CustomerBaseTable load_customer_base(Run& run) {
  run.require_input(run.config().customer_csv, "customer base CSV");
  std::ifstream in(run.config().customer_csv, std::ios::binary);
  if (!in) throw MissingInputError("customer base CSV not found: " + run.config().customer_csv);
  return ingest::CustomerBaseTable::from_csv(in);
}

// Synthesizes the compact per-month stream equivalent that monthly change
// rates need; one aggregated observation per calendar month.
ingest::RecordStream month_stream(const CountyData& county, const features::Period& period) {
  ingest::RecordStream s;
  s.fips = county.fips;
  const std::int64_t first_month = timegrid::month_index(period.begin);
  for (std::size_t m = 0; m < county.month_sums.size(); ++m) {
    if (county.month_sums[m] == 0) continue;
    const std::int64_t month = first_month + static_cast<std::int64_t>(m);
    const int year = static_cast<int>(month / 12);
    const unsigned mon = static_cast<unsigned>(month % 12) + 1;
    s.records.push_back({timegrid::to_epoch(year, mon, 1), county.month_sums[m]});
  }
  return s;
}

std::map<std::string, events::EventSeries> read_events_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError("events CSV not found: " + path);
  csv::Reader reader(in);
  const int c_fips = reader.require_column("fips");
  const int c_start = reader.require_column("start");
  const int c_end = reader.require_column("end");
  const int c_dur = reader.require_column("duration_h");
  const int c_peak = reader.require_column("peak_out");
  const int c_peak_rate = reader.require_column("peak_rate");
  const int c_mean_rate = reader.require_column("mean_rate");
  const int c_ch = reader.require_column("customer_hours");

  std::map<std::string, events::EventSeries> out;
  std::vector<std::string_view> fields;
  while (reader.next_row(fields)) {
    events::OutageEvent e;
    e.fips = std::string(fields[c_fips]);
    const auto start = timegrid::parse_timestamp(fields[c_start]);
    const auto end = timegrid::parse_timestamp(fields[c_end]);
    if (!start || !end)
      throw SchemaError("events CSV line " + std::to_string(reader.line_number()) +
                        ": bad timestamp");
    e.start = *start;
    e.end = *end;
    e.duration_h = std::stod(std::string(fields[c_dur]));
    e.peak_out = std::stoll(std::string(fields[c_peak]));
    e.peak_rate = std::stod(std::string(fields[c_peak_rate]));
    e.mean_rate = std::stod(std::string(fields[c_mean_rate]));
    e.customer_hours = std::stod(std::string(fields[c_ch]));
    auto& series = out[e.fips];
    series.fips = e.fips;
    series.events.push_back(std::move(e));
  }
  for (auto& [fips, series] : out)
    series.inter_event_gaps_days = events::event_gaps(series);
  return out;
}

// --- stages -----------------------------------------------------------------

void stage_synth(Run& run) {
  const Config& cfg = run.config();
  if (!cfg.scenario) throw MissingInputError("synth: no scenario in config");
  StageRecord& stage = run.begin_stage("synth");

  const synth::SyntheticData data = synth::generate_stream(*cfg.scenario);
  {
    auto out = run.open_output(stage, "outage.csv");
    ingest::write_records_csv(out, data.streams);
  }
  {
    auto out = run.open_output(stage, "customers.csv");
    synth::write_customer_csv(out, data, *cfg.scenario);
  }
  {
    const auto categories = synth::nri_from_truth(data, cfg.scenario->seed ^ 0x5157);
    auto out = run.open_output(stage, "nri.csv");
    synth::write_nri_csv(out, categories);
  }
  {
    auto out = run.open_output(stage, "truth_events.csv");
    events::write_events_csv(out, data.truth_events);
  }
  {
    auto out = run.open_output(stage, "truth_features.csv");
    features::write_features_csv(out, data.truth_features);
  }

  // Grouping files and a state energy mix so disparity analysis has inputs.
  const std::size_t n = data.streams.size();
  std::vector<std::int64_t> customers_sorted = data.customers;
  std::sort(customers_sorted.begin(), customers_sorted.end());
  const std::int64_t median = customers_sorted[n / 2];
  {
    auto out = run.open_output(stage, "groups_urban_rural.csv");
    out << "fips,label\n";
    for (std::size_t i = 0; i < n; ++i)
      out << data.streams[i].fips << ','
          << (data.customers[i] >= median ? "urban" : "rural") << '\n';
  }
  {
    static const char* kRtos[] = {"CAISO", "SPP", "ERCOT", "MISO", "NYISO", "ISO-NE", "PJM"};
    auto out = run.open_output(stage, "groups_rto.csv");
    out << "fips,label\n";
    for (std::size_t i = 0; i < n; ++i) {
      const std::string& fips = data.streams[i].fips;
      const std::uint64_t h = fnv1a(fips);
      out << fips << ',' << (h % 13 == 0 ? "boundary" : kRtos[h % 7]) << '\n';
    }
  }
  std::set<std::string> states;
  {
    auto out = run.open_output(stage, "groups_state.csv");
    out << "fips,label\n";
    for (std::size_t i = 0; i < n; ++i) {
      const std::string state = data.streams[i].fips.substr(0, 2);
      states.insert(state);
      out << data.streams[i].fips << ',' << state << '\n';
    }
  }
  {
    auto out = run.open_output(stage, "energy.csv");
    out << "state,solar_pct,wind_pct\n";
    for (const std::string& state : states) {
      Rng rng(cfg.scenario->seed ^ fnv1a(state));
      out << state << ',' << csv::format_fixed(rng.uniform(0.0, 30.0), 3) << ','
          << csv::format_fixed(rng.uniform(0.0, 40.0), 3) << '\n';
    }
  }
  run.write_json(stage, "scenario.json", cfg.scenario->to_json());

  stage.rows["counties"] = static_cast<std::int64_t>(n);
  std::int64_t samples = 0;
  for (const auto& s : data.streams) samples += static_cast<std::int64_t>(s.records.size());
  stage.rows["records"] = samples;
  std::int64_t n_events = 0;
  for (const auto& s : data.truth_events) n_events += static_cast<std::int64_t>(s.events.size());
  stage.rows["events"] = n_events;
  run.end_stage();
}

void stage_ingest(Run& run) {
  StageRecord& stage = run.begin_stage("ingest");
  const ingest::CustomerBaseTable base = load_customer_base(run);
  AggregateResult agg = aggregate_outages(run, base, /*want_events=*/false, /*keep_rejects=*/true);

  std::sort(agg.rejects.begin(), agg.rejects.end(),
            [](const ingest::RejectedRow& a, const ingest::RejectedRow& b) {
              return std::tie(a.fips, a.timestamp, a.reason) < std::tie(b.fips, b.timestamp, b.reason);
            });
  {
    auto out = run.open_output(stage, "rejects.csv");
    ingest::write_rejects_csv(out, agg.rejects);
  }
  run.write_json(stage, "ingest_summary.json",
                 json{{"total_rows", agg.stats.total_rows},
                      {"accepted", agg.stats.accepted},
                      {"rejected", agg.stats.rejected},
                      {"duplicates_merged", agg.stats.duplicates_merged},
                      {"snapped_timestamps", agg.stats.snapped},
                      {"counties", agg.counties.size()},
                      {"counties_missing_denominator", agg.excluded_counties}});
  stage.rows["total"] = static_cast<std::int64_t>(agg.stats.total_rows);
  stage.rows["accepted"] = static_cast<std::int64_t>(agg.stats.accepted);
  stage.rows["rejected"] = static_cast<std::int64_t>(agg.stats.rejected);
  stage.rows["counties"] = static_cast<std::int64_t>(agg.counties.size());
  run.end_stage();
}

void stage_events(Run& run) {
  StageRecord& stage = run.begin_stage("events");
  const ingest::CustomerBaseTable base = load_customer_base(run);
  AggregateResult agg = aggregate_outages(run, base, /*want_events=*/true, /*keep_rejects=*/false);

  std::vector<events::EventSeries> all;
  all.reserve(agg.counties.size());
  std::int64_t n_events = 0;
  for (CountyData& county : agg.counties) {
    n_events += static_cast<std::int64_t>(county.series.events.size());
    all.push_back(std::move(county.series));
  }
  {
    auto out = run.open_output(stage, "events.csv");
    events::write_events_csv(out, all);
  }
  {
    auto out = run.open_output(stage, "excluded_counties.csv");
    out << "fips,reason\n";
    for (const std::string& fips : agg.excluded_counties)
      out << fips << ",missing customer base\n";
  }
  stage.rows["events"] = n_events;
  stage.rows["counties"] = static_cast<std::int64_t>(all.size());
  stage.rows["excluded"] = static_cast<std::int64_t>(agg.excluded_counties.size());
  run.end_stage();
}

features::FeatureOptions feature_options(const Config& cfg) {
  features::FeatureOptions opt;
  opt.large_event_rate = cfg.large_event_rate;
  opt.long_event_hours = cfg.long_event_hours;
  opt.cum_affected_sample_sum = cfg.cum_affected_sample_sum;
  return opt;
}

void write_norm_params(Run& run, StageRecord& stage, const features::NormalizationParams& params,
                       const std::string& name) {
  auto out = run.open_output(stage, name);
  out << "feature,min,max,constant\n";
  for (int c = 0; c < features::kFeatureCount; ++c)
    out << features::kFeatureNames[static_cast<std::size_t>(c)] << ','
        << csv::format_double(params.min[static_cast<std::size_t>(c)]) << ','
        << csv::format_double(params.max[static_cast<std::size_t>(c)]) << ','
        << (params.constant[static_cast<std::size_t>(c)] ? 1 : 0) << '\n';
}

void stage_features(Run& run) {
  const Config& cfg = run.config();
  StageRecord& stage = run.begin_stage("features");
  run.require_input(run.path("events.csv"), "events output (run the events stage first)");

  const ingest::CustomerBaseTable base = load_customer_base(run);
  auto events_by_fips = read_events_csv(run.path("events.csv"));
  AggregateResult agg = aggregate_outages(run, base, /*want_events=*/false, /*keep_rejects=*/false);
  const features::Period period = features::years_period(cfg.start_year, cfg.end_year);
  const features::FeatureOptions options = feature_options(cfg);

  features::FeatureMatrix matrix;
  matrix.period_tag = period.tag;
  static const events::EventSeries kEmptySeries;
  for (const CountyData& county : agg.counties) {
    const auto it = events_by_fips.find(county.fips);
    const events::EventSeries& series = it != events_by_fips.end() ? it->second : kEmptySeries;
    const std::int64_t total = base.customers_total(county.fips, cfg.start_year);
    matrix.fips.push_back(county.fips);
    matrix.rows.push_back(
        features::compute_features(series, month_stream(county, period), total, period, options));
  }
  if (matrix.rows.size() < 2)
    throw Error("features: fewer than 2 counties with data; cannot normalize");

  const features::NormalizedMatrix normalized = features::minmax_normalize(matrix);
  {
    auto out = run.open_output(stage, "features.csv");
    features::write_features_csv(out, matrix);
  }
  {
    auto out = run.open_output(stage, "features_normalized.csv");
    features::write_features_csv(out, normalized.matrix);
  }
  write_norm_params(run, stage, normalized.params, "norm_params.csv");
  {
    auto out = run.open_output(stage, "excluded_counties.csv");
    out << "fips,reason\n";
    for (const std::string& fips : agg.excluded_counties)
      out << fips << ",missing customer base\n";
  }
  stage.rows["counties"] = static_cast<std::int64_t>(matrix.rows.size());
  stage.rows["excluded"] = static_cast<std::int64_t>(agg.excluded_counties.size());
  run.end_stage();
}

Matrix matrix_from_features(const features::FeatureMatrix& m) {
  Matrix out(m.rows.size(), features::kFeatureCount);
  for (std::size_t r = 0; r < m.rows.size(); ++r)
    for (int c = 0; c < features::kFeatureCount; ++c) out.at(r, c) = m.rows[r][c];
  return out;
}

features::FeatureMatrix load_feature_csv(Run& run, const std::string& name) {
  const std::string p = run.path(name);
  run.require_input(p, name + " (run the features stage first)");
  std::ifstream in(p, std::ios::binary);
  return features::read_features_csv(in);
}

void stage_train(Run& run) {
  const Config& cfg = run.config();
  StageRecord& stage = run.begin_stage("train");
  const features::FeatureMatrix normalized = load_feature_csv(run, "features_normalized.csv");
  run.require_input(cfg.nri_csv, "NRI CSV");

  std::ifstream nri_in(cfg.nri_csv, std::ios::binary);
  const model::NriLabels labels = model::label_from_nri(model::read_nri_csv(nri_in));

  model::LabeledDataset data;
  std::vector<std::string> unlabeled;
  for (std::size_t r = 0; r < normalized.rows.size(); ++r) {
    const auto it = labels.labels.find(normalized.fips[r]);
    if (it == labels.labels.end()) {
      unlabeled.push_back(normalized.fips[r]);
      continue;
    }
    data.x.append_row(std::span<const double>(normalized.rows[r].v.data(),
                                              features::kFeatureCount));
    data.y.push_back(it->second);
    data.ids.push_back(normalized.fips[r]);
  }
  if (data.size() < 10) throw Error("train: fewer than 10 labeled counties");

  // Multicollinearity diagnostics; constant (flagged) columns are skipped.
  std::vector<int> usable_columns;
  for (int c = 0; c < features::kFeatureCount; ++c) {
    const auto col = data.x.column(static_cast<std::size_t>(c));
    if (!std::all_of(col.begin(), col.end(), [&](double v) { return v == col.front(); }))
      usable_columns.push_back(c);
  }
  std::vector<double> vif_values;
  if (usable_columns.size() >= 2 && data.size() >= usable_columns.size() + 2) {
    Matrix sub(data.size(), usable_columns.size());
    for (std::size_t r = 0; r < data.size(); ++r)
      for (std::size_t c = 0; c < usable_columns.size(); ++c)
        sub.at(r, c) = data.x.at(r, static_cast<std::size_t>(usable_columns[c]));
    vif_values = model::vif(sub);
  }
  {
    auto out = run.open_output(stage, "vif.csv");
    out << "feature,vif\n";
    std::size_t k = 0;
    for (int c = 0; c < features::kFeatureCount; ++c) {
      const bool usable =
          std::find(usable_columns.begin(), usable_columns.end(), c) != usable_columns.end();
      out << features::kFeatureNames[static_cast<std::size_t>(c)] << ',';
      if (usable && k < vif_values.size())
        out << csv::format_double(vif_values[k++]);
      else
        out << "constant";
      out << '\n';
    }
  }

  const auto [train, test] = model::split_train_test(data, cfg.test_fraction, cfg.seed);

  model::Hyperparams best = cfg.hyperparams;
  if (cfg.use_search) {
    const model::CvResult cv =
        model::random_search_cv(train, cfg.search_space, cfg.search_trials, cfg.cv_folds, cfg.seed,
                                cfg.smote_k, cfg.effective_threads());
    best = cv.best;
    json trials = json::array();
    for (const model::TrialResult& t : cv.trials)
      trials.push_back(json{{"params", t.params.to_json()},
                            {"mean_f1", t.mean_f1},
                            {"fold_f1", t.fold_f1}});
    run.write_json(stage, "cv_results.json",
                   json{{"best_trial", cv.best_trial}, {"trials", trials}});
  }
  run.write_json(stage, "best_params.json", best.to_json());

  const model::LabeledDataset balanced =
      model::smote(train, cfg.smote_k, cfg.seed ^ 0xb5cULL, cfg.smote_undersample);
  std::vector<std::string> feature_names(features::kFeatureNames.begin(),
                                         features::kFeatureNames.end());
  const model::TreeEnsemble ensemble = model::train_gbdt(balanced, best, cfg.seed ^ 0x7e1ULL,
                                                         nullptr, feature_names);
  run.write_json(stage, "model.json", ensemble.to_json());

  std::vector<double> scores(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) scores[i] = ensemble.predict_proba(test.x.row(i));
  const model::Metrics metrics = model::evaluate(test.y, scores);
  run.write_json(stage, "metrics.json", metrics.to_json());

  json rejected = json::array();
  for (const auto& [fips, category] : labels.rejected)
    rejected.push_back(json{{"fips", fips}, {"category", category}});
  run.write_json(stage, "train_summary.json",
                 json{{"labeled_counties", data.size()},
                      {"label_0", labels.count_low},
                      {"label_1", labels.count_other},
                      {"counties_without_label", unlabeled},
                      {"rejected_nri_rows", rejected},
                      {"train_rows", train.size()},
                      {"test_rows", test.size()},
                      {"balanced_train_rows", balanced.size()}});
  stage.rows["labeled"] = static_cast<std::int64_t>(data.size());
  stage.rows["train"] = static_cast<std::int64_t>(train.size());
  stage.rows["test"] = static_cast<std::int64_t>(test.size());
  run.end_stage();
}

model::TreeEnsemble load_model(Run& run) {
  const std::string p = run.path("model.json");
  run.require_input(p, "model artifact (run the train stage first)");
  std::ifstream in(p, std::ios::binary);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw SchemaError(std::string("model.json is not valid JSON: ") + e.what());
  }
  return model::TreeEnsemble::from_json(j);
}

// A model that learned no splits attributes zero to every feature, which
// makes the normalized weights undefined. The stage degrades to uniform
// weights instead of failing the run.
explain::WeightVector weights_or_uniform(const explain::ImportanceTable& table,
                                         explain::WeightMode mode, std::ostream& log) {
  try {
    return explain::weights_from_shap(table, mode);
  } catch (const DomainError& e) {
    log << "warning: " << e.what() << "; using uniform weights\n";
    explain::WeightVector w;
    w.mode = mode;
    w.w.assign(table.feature_names.size(), 1.0 / static_cast<double>(table.feature_names.size()));
    return w;
  }
}

void write_importance_csv(std::ostream& out, const explain::ImportanceTable& table,
                          const explain::WeightVector& weights) {
  out << "feature,dimension,signed_importance,abs_importance,weight\n";
  for (std::size_t f = 0; f < table.feature_names.size(); ++f)
    out << table.feature_names[f] << ',' << table.dimensions[f] << ','
        << csv::format_double(table.signed_mean[f]) << ',' << csv::format_double(table.abs_mean[f])
        << ',' << csv::format_double(weights.w[f]) << '\n';
}

void stage_explain(Run& run) {
  const Config& cfg = run.config();
  StageRecord& stage = run.begin_stage("explain");
  const model::TreeEnsemble ensemble = load_model(run);
  const features::FeatureMatrix normalized = load_feature_csv(run, "features_normalized.csv");

  const Matrix rows = matrix_from_features(normalized);
  std::vector<std::string> dims(features::kFeatureDimensions.begin(),
                                features::kFeatureDimensions.end());
  const explain::ImportanceTable table =
      explain::global_importance(ensemble, rows, dims, cfg.effective_threads());
  const explain::WeightVector weights =
      weights_or_uniform(table, explain::weight_mode_from_name(cfg.weight_mode), run.log());

  {
    auto out = run.open_output(stage, "importance.csv");
    write_importance_csv(out, table, weights);
  }
  run.write_json(stage, "importance_summary.json",
                 json{{"base_margin", table.base},
                      {"rows", table.n_rows},
                      {"weight_mode", cfg.weight_mode},
                      {"dimension_totals", table.dimension_totals},
                      {"dimension_shares_pct", table.dimension_shares}});
  stage.rows["rows"] = static_cast<std::int64_t>(table.n_rows);
  run.end_stage();
}

explain::WeightVector read_weights_csv(Run& run, const std::string& name) {
  const std::string p = run.path(name);
  run.require_input(p, "importance table (run the explain stage first)");
  std::ifstream in(p, std::ios::binary);
  csv::Reader reader(in);
  const int c_feature = reader.require_column("feature");
  const int c_weight = reader.require_column("weight");
  std::map<std::string, double> by_feature;
  std::vector<std::string_view> fields;
  while (reader.next_row(fields))
    by_feature[std::string(fields[c_feature])] = std::stod(std::string(fields[c_weight]));

  explain::WeightVector out;
  for (const char* name_c : features::kFeatureNames) {
    const auto it = by_feature.find(name_c);
    if (it == by_feature.end())
      throw SchemaError(std::string("importance table missing feature ") + name_c);
    out.w.push_back(it->second);
  }
  return out;
}

void stage_index(Run& run) {
  const Config& cfg = run.config();
  StageRecord& stage = run.begin_stage("index");
  const features::FeatureMatrix normalized = load_feature_csv(run, "features_normalized.csv");
  const explain::WeightVector weights = read_weights_csv(run, "importance.csv");

  std::vector<double> values = scoring::psvi_values(normalized, weights);
  if (cfg.rescale_values) values = scoring::rescale_values_1_100(values);
  const std::vector<double> scores = scoring::percentile_scores(values);
  const scoring::KmeansResult km =
      scoring::kmeans_ratings(values, 5, cfg.seed ^ 0x3adULL, 20, cfg.effective_threads());

  {
    auto out = run.open_output(stage, "index.csv");
    out << "fips,period,value,score,rating\n";
    for (std::size_t i = 0; i < values.size(); ++i)
      out << normalized.fips[i] << ',' << normalized.period_tag << ','
          << csv::format_double(values[i]) << ',' << csv::format_fixed(scores[i], 2) << ','
          << scoring::rating_name(km.ratings[i]) << '\n';
  }
  {
    std::map<std::string, std::pair<double, std::int64_t>> by_state;
    for (std::size_t i = 0; i < values.size(); ++i) {
      auto& [sum, count] = by_state[normalized.fips[i].substr(0, 2)];
      sum += values[i];
      ++count;
    }
    auto out = run.open_output(stage, "state_means.csv");
    out << "state,mean_value,n\n";
    for (const auto& [state, agg] : by_state)
      out << state << ',' << csv::format_double(agg.first / static_cast<double>(agg.second)) << ','
          << agg.second << '\n';
  }
  std::map<std::string, int> rating_counts;
  for (const scoring::Rating r : km.ratings) ++rating_counts[scoring::rating_name(r)];
  run.write_json(stage, "index_summary.json",
                 json{{"silhouette", km.silhouette},
                      {"centroids", km.centroids},
                      {"rating_counts", rating_counts},
                      {"rescaled_values", cfg.rescale_values}});
  stage.rows["counties"] = static_cast<std::int64_t>(values.size());
  run.end_stage();
}

void stage_annual(Run& run) {
  const Config& cfg = run.config();
  StageRecord& stage = run.begin_stage("annual");
  run.require_input(run.path("events.csv"), "events output (run the events stage first)");
  run.require_input(cfg.nri_csv, "NRI CSV");
  explain::WeightVector decade_weights;
  model::Hyperparams params = cfg.hyperparams;
  if (cfg.annual_reuse_decade_weights) {
    decade_weights = read_weights_csv(run, "importance.csv");
  } else {
    const std::string p = run.path("best_params.json");
    run.require_input(p, "trained hyperparameters (run the train stage first)");
    std::ifstream in(p, std::ios::binary);
    json j;
    in >> j;
    params = model::Hyperparams::from_json(j);
  }

  const ingest::CustomerBaseTable base = load_customer_base(run);
  auto events_by_fips = read_events_csv(run.path("events.csv"));
  AggregateResult agg = aggregate_outages(run, base, /*want_events=*/false, /*keep_rejects=*/false);

  std::ifstream nri_in(cfg.nri_csv, std::ios::binary);
  const model::NriLabels labels = model::label_from_nri(model::read_nri_csv(nri_in));

  const features::FeatureOptions options = feature_options(cfg);
  static const events::EventSeries kEmptySeries;

  std::map<std::string, std::vector<scoring::Rating>> ratings_by_county;
  json year_summaries = json::array();

  auto index_out = run.open_output(stage, "index_annual.csv");
  index_out << "fips,period,value,score,rating\n";
  auto state_out = run.open_output(stage, "annual_state_means.csv");
  state_out << "state,period,mean_value,n\n";

  for (int year = cfg.start_year; year <= cfg.end_year; ++year) {
    const features::Period period = features::year_period(year);

    features::FeatureMatrix matrix;
    matrix.period_tag = period.tag;
    for (const CountyData& county : agg.counties) {
      const auto it = events_by_fips.find(county.fips);
      const events::EventSeries& series = it != events_by_fips.end() ? it->second : kEmptySeries;
      const std::int64_t total = base.customers_total(county.fips, year);
      matrix.fips.push_back(county.fips);
      matrix.rows.push_back(features::compute_features(series, month_stream(county, period), total,
                                                       period, options));
    }
    if (matrix.rows.size() < 2) throw Error("annual: fewer than 2 counties with data");
    const features::NormalizedMatrix normalized = features::minmax_normalize(matrix);
    const std::uint64_t year_seed = cfg.seed ^ (static_cast<std::uint64_t>(year) * 0x9e37ULL);

    explain::WeightVector weights;
    json model_summary;
    if (cfg.annual_reuse_decade_weights) {
      weights = decade_weights;
    } else {
      model::LabeledDataset data;
      for (std::size_t r = 0; r < normalized.matrix.rows.size(); ++r) {
        const auto it = labels.labels.find(normalized.matrix.fips[r]);
        if (it == labels.labels.end()) continue;
        data.x.append_row(std::span<const double>(normalized.matrix.rows[r].v.data(),
                                                  features::kFeatureCount));
        data.y.push_back(it->second);
        data.ids.push_back(normalized.matrix.fips[r]);
      }
      if (data.size() < 10) throw Error("annual: fewer than 10 labeled counties in " + period.tag);
      const auto [train, test] = model::split_train_test(data, cfg.test_fraction, year_seed);
      const model::LabeledDataset balanced =
          model::smote(train, cfg.smote_k, year_seed ^ 0xb5cULL, cfg.smote_undersample);
      std::vector<std::string> feature_names(features::kFeatureNames.begin(),
                                             features::kFeatureNames.end());
      const model::TreeEnsemble ensemble =
          model::train_gbdt(balanced, params, year_seed ^ 0x7e1ULL, nullptr, feature_names);
      std::vector<double> scores(test.size());
      for (std::size_t i = 0; i < test.size(); ++i)
        scores[i] = ensemble.predict_proba(test.x.row(i));
      const model::Metrics metrics = model::evaluate(test.y, scores);
      model_summary = metrics.to_json();

      const Matrix rows = matrix_from_features(normalized.matrix);
      std::vector<std::string> dims(features::kFeatureDimensions.begin(),
                                    features::kFeatureDimensions.end());
      const explain::ImportanceTable table =
          explain::global_importance(ensemble, rows, dims, cfg.effective_threads());
      weights = weights_or_uniform(table, explain::weight_mode_from_name(cfg.weight_mode), run.log());
    }

    std::vector<double> values = scoring::psvi_values(normalized.matrix, weights);
    if (cfg.rescale_values) values = scoring::rescale_values_1_100(values);
    const std::vector<double> scores = scoring::percentile_scores(values);
    const scoring::KmeansResult km =
        scoring::kmeans_ratings(values, 5, year_seed ^ 0x3adULL, 20, cfg.effective_threads());

    for (std::size_t i = 0; i < values.size(); ++i) {
      index_out << normalized.matrix.fips[i] << ',' << period.tag << ','
                << csv::format_double(values[i]) << ',' << csv::format_fixed(scores[i], 2) << ','
                << scoring::rating_name(km.ratings[i]) << '\n';
      ratings_by_county[normalized.matrix.fips[i]].push_back(km.ratings[i]);
    }
    std::map<std::string, std::pair<double, std::int64_t>> by_state;
    for (std::size_t i = 0; i < values.size(); ++i) {
      auto& [sum, count] = by_state[normalized.matrix.fips[i].substr(0, 2)];
      sum += values[i];
      ++count;
    }
    for (const auto& [state, state_agg] : by_state)
      state_out << state << ',' << period.tag << ','
                << csv::format_double(state_agg.first / static_cast<double>(state_agg.second))
                << ',' << state_agg.second << '\n';

    json summary{{"year", year}, {"silhouette", km.silhouette},
                 {"counties", values.size()}};
    if (!model_summary.is_null()) summary["test_metrics"] = model_summary;
    year_summaries.push_back(summary);
  }

  const std::vector<scoring::HotspotFlag> flags = scoring::hotspots(ratings_by_county);
  {
    auto out = run.open_output(stage, "hotspots.csv");
    out << "fips,years_high,tier\n";
    for (const scoring::HotspotFlag& f : flags)
      out << f.fips << ',' << f.years_high << ',' << f.tier << '\n';
  }
  run.write_json(stage, "annual_summary.json", json{{"years", year_summaries}});
  stage.rows["years"] = cfg.end_year - cfg.start_year + 1;
  stage.rows["hotspots"] = static_cast<std::int64_t>(flags.size());
  run.end_stage();
}

std::map<std::string, std::string> read_label_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError("group CSV not found: " + path);
  csv::Reader reader(in);
  const int c_fips = reader.require_column("fips");
  const int c_label = reader.require_column("label");
  std::map<std::string, std::string> out;
  std::vector<std::string_view> fields;
  while (reader.next_row(fields)) out[std::string(fields[c_fips])] = std::string(fields[c_label]);
  return out;
}

void stage_analyze(Run& run) {
  const Config& cfg = run.config();
  StageRecord& stage = run.begin_stage("analyze");
  const std::string index_path = run.path("index.csv");
  run.require_input(index_path, "index output (run the index stage first)");

  // Load per-county values.
  std::map<std::string, double> value_of;
  {
    std::ifstream in(index_path, std::ios::binary);
    csv::Reader reader(in);
    const int c_fips = reader.require_column("fips");
    const int c_value = reader.require_column("value");
    std::vector<std::string_view> fields;
    while (reader.next_row(fields))
      value_of[std::string(fields[c_fips])] = std::stod(std::string(fields[c_value]));
  }

  json report;
  report["n_counties"] = value_of.size();

  for (const auto& [scheme, path] : cfg.group_csvs) {
    run.require_input(path, "group CSV for scheme " + scheme);
    const auto label_of = read_label_csv(path);

    std::vector<double> values;
    std::vector<std::string> labels;
    std::map<std::string, std::vector<double>> grouped;
    for (const auto& [fips, value] : value_of) {
      const auto it = label_of.find(fips);
      if (it == label_of.end()) continue;
      values.push_back(value);
      labels.push_back(it->second);
      grouped[it->second].push_back(value);
    }
    json scheme_report;
    scheme_report["n"] = values.size();

    const analysis::GroupSummary summary = analysis::group_summary(values, labels);
    json groups_json;
    for (const auto& [label, box] : summary.by_group)
      groups_json[label] = json{{"n", box.n},     {"min", box.min},     {"q1", box.q1},
                                {"median", box.median}, {"q3", box.q3}, {"max", box.max},
                                {"mean", box.mean}};
    scheme_report["groups"] = groups_json;

    std::vector<std::vector<double>> samples;
    for (const auto& [label, xs] : grouped) samples.push_back(xs);
    if (samples.size() >= 2) {
      bool kw_ok = true;
      std::size_t total = 0;
      for (const auto& g : samples) total += g.size();
      if (total >= 5) {
        const analysis::TestResult kw = analysis::kruskal_wallis(samples);
        scheme_report["kruskal_wallis"] =
            json{{"H", kw.statistic}, {"p_value", kw.p_value}, {"degenerate", kw.degenerate}};
      } else {
        kw_ok = false;
      }
      const bool anova_ok =
          std::all_of(samples.begin(), samples.end(), [](const auto& g) { return g.size() >= 2; });
      if (anova_ok) {
        const analysis::TestResult av = analysis::anova_oneway(samples);
        scheme_report["anova"] =
            json{{"F", av.statistic}, {"p_value", av.p_value}, {"degenerate", av.degenerate}};
      }
      (void)kw_ok;
    }

    // Cumulative distribution curves per group on a shared grid.
    if (!values.empty()) {
      const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
      const double lo = *lo_it, hi = *hi_it;
      std::vector<double> grid(201);
      for (std::size_t i = 0; i < grid.size(); ++i)
        grid[i] = lo + (hi - lo) * static_cast<double>(i) / 200.0;
      auto out = run.open_output(stage, "ecdf_" + scheme + ".csv");
      out << "x";
      std::vector<std::pair<std::string, analysis::Ecdf>> curves;
      for (const auto& [label, xs] : grouped) {
        out << ',' << label;
        curves.emplace_back(label, analysis::Ecdf(xs));
      }
      out << '\n';
      for (const double x : grid) {
        out << csv::format_double(x);
        for (const auto& [label, curve] : curves) out << ',' << csv::format_double(curve(x));
        out << '\n';
      }
    }
    report["schemes"][scheme] = scheme_report;
  }

  // State-level energy mix against state mean values.
  if (!cfg.energy_csv.empty()) {
    run.require_input(cfg.energy_csv, "energy mix CSV");
    std::map<std::string, std::pair<double, double>> energy;  // state -> (solar, wind)
    {
      std::ifstream in(cfg.energy_csv, std::ios::binary);
      csv::Reader reader(in);
      const int c_state = reader.require_column("state");
      const int c_solar = reader.require_column("solar_pct");
      const int c_wind = reader.require_column("wind_pct");
      std::vector<std::string_view> fields;
      while (reader.next_row(fields))
        energy[std::string(fields[c_state])] = {std::stod(std::string(fields[c_solar])),
                                                std::stod(std::string(fields[c_wind]))};
    }
    std::map<std::string, std::pair<double, std::int64_t>> state_sum;
    for (const auto& [fips, value] : value_of) {
      auto& [sum, count] = state_sum[fips.substr(0, 2)];
      sum += value;
      ++count;
    }
    std::vector<double> solar, wind, state_values;
    for (const auto& [state, agg] : state_sum) {
      const auto it = energy.find(state);
      if (it == energy.end()) continue;
      state_values.push_back(agg.first / static_cast<double>(agg.second));
      solar.push_back(it->second.first);
      wind.push_back(it->second.second);
    }
    if (state_values.size() >= 3) {
      const auto regress = [&](const std::vector<double>& x, const char* name) {
        const analysis::RegressionResult r = analysis::ols_simple(x, state_values);
        report["energy"][name] = json{{"slope", r.slope},
                                      {"intercept", r.intercept},
                                      {"r_squared", r.r_squared},
                                      {"p_value", r.p_value},
                                      {"n", r.n}};
        return r;
      };
      const analysis::RegressionResult rs = regress(solar, "solar");
      const analysis::RegressionResult rw = regress(wind, "wind");
      auto out = run.open_output(stage, "ols_energy.csv");
      out << "series,x,fit,ci_low,ci_high\n";
      const auto band = [&](const analysis::RegressionResult& r, const std::vector<double>& xs,
                            const char* name) {
        const auto [lo_it, hi_it] = std::minmax_element(xs.begin(), xs.end());
        for (int i = 0; i <= 50; ++i) {
          const double x = *lo_it + (*hi_it - *lo_it) * static_cast<double>(i) / 50.0;
          const double fit = r.predict(x);
          const double hw = r.conf_band_halfwidth(x);
          out << name << ',' << csv::format_double(x) << ',' << csv::format_double(fit) << ','
              << csv::format_double(fit - hw) << ',' << csv::format_double(fit + hw) << '\n';
        }
      };
      band(rs, solar, "solar");
      band(rw, wind, "wind");
    }
  }

  // Urban-form structure features: PCA down to three components, correlated
  // against the index per urbanicity group when available.
  if (!cfg.urban_form_csv.empty()) {
    run.require_input(cfg.urban_form_csv, "urban form CSV");
    std::ifstream in(cfg.urban_form_csv, std::ios::binary);
    csv::Reader reader(in);
    const int c_fips = reader.require_column("fips");
    std::vector<int> feature_cols;
    for (std::size_t c = 0; c < reader.header().size(); ++c)
      if (static_cast<int>(c) != c_fips) feature_cols.push_back(static_cast<int>(c));

    std::vector<std::string> fips_rows;
    Matrix raw;
    std::vector<std::string_view> fields;
    std::vector<double> row(feature_cols.size());
    while (reader.next_row(fields)) {
      const std::string fips(fields[c_fips]);
      if (value_of.find(fips) == value_of.end()) continue;
      for (std::size_t c = 0; c < feature_cols.size(); ++c)
        row[c] = std::stod(std::string(fields[static_cast<std::size_t>(feature_cols[c])]));
      raw.append_row(row);
      fips_rows.push_back(fips);
    }
    if (raw.rows() >= 8 && raw.cols() >= 3) {
      const Matrix standardized = analysis::standardize_columns(raw);
      const analysis::PcaResult p = analysis::pca(standardized, 3);
      json pca_json;
      pca_json["explained_ratio"] = p.explained_ratio;
      double cumulative = 0.0;
      for (const double r : p.explained_ratio) cumulative += r;
      pca_json["cumulative_explained"] = cumulative;

      std::vector<double> psvi_aligned(fips_rows.size());
      for (std::size_t i = 0; i < fips_rows.size(); ++i) psvi_aligned[i] = value_of.at(fips_rows[i]);
      static const char* kComponents[] = {"component_1", "component_2", "component_3"};
      for (int c = 0; c < 3; ++c) {
        const auto col = p.transformed.column(static_cast<std::size_t>(c));
        const analysis::PearsonResult pr = analysis::pearson(col, psvi_aligned);
        pca_json["psvi_correlation"][kComponents[c]] =
            json{{"r", pr.r}, {"p_value", pr.p_value}, {"n", pr.n}};
      }
      report["urban_form_pca"] = pca_json;
    }
  }

  run.write_json(stage, "analysis.json", report);
  stage.rows["counties"] = static_cast<std::int64_t>(value_of.size());
  run.end_stage();
}

}  // namespace

int run(const std::string& subcommand, const Config& raw_config, std::ostream& log) {
  try {
    if (std::find(kSubcommands.begin(), kSubcommands.end(), subcommand) == kSubcommands.end())
      throw DomainError("unknown subcommand: " + subcommand);

    Config config = resolve_inputs(raw_config);
    Run run_state(config, log);

    const auto dispatch = [&](const std::string& name) {
      if (name == "synth") stage_synth(run_state);
      else if (name == "ingest") stage_ingest(run_state);
      else if (name == "events") stage_events(run_state);
      else if (name == "features") stage_features(run_state);
      else if (name == "train") stage_train(run_state);
      else if (name == "explain") stage_explain(run_state);
      else if (name == "index") stage_index(run_state);
      else if (name == "annual") stage_annual(run_state);
      else if (name == "analyze") stage_analyze(run_state);
    };

    if (subcommand == "all") {
      for (const char* name : {"ingest", "events", "features", "train", "explain", "index"})
        dispatch(name);
      if (config.end_year > config.start_year) dispatch("annual");
      dispatch("analyze");
    } else {
      dispatch(subcommand);
    }
    run_state.finalize(subcommand);
    return kExitOk;
  } catch (const MissingInputError& e) {
    log << "error: " << e.what() << '\n';
    return kExitMissingInput;
  } catch (const SchemaError& e) {
    log << "error: " << e.what() << '\n';
    return kExitSchema;
  } catch (const InvariantError& e) {
    log << "error: " << e.what() << '\n';
    return kExitInvariant;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kExitError;
  }
}

}  // namespace psvi::pipeline
