#include "psvi/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <unordered_set>

#include "psvi/errors.hpp"
#include "psvi/parallel.hpp"
#include "psvi/rng.hpp"
#include "psvi/timegrid.hpp"

namespace psvi::synth {

using timegrid::kIntervalSec;

void ScenarioSpec::validate() const {
  if (counties < 1) throw DomainError("scenario: counties must be >= 1");
  if (years < 1) throw DomainError("scenario: years must be >= 1");
  if (events_per_county_year < 0.0) throw DomainError("scenario: event rate must be >= 0");
  if (customers_min < 2 || customers_max < customers_min)
    throw DomainError("scenario: invalid customer range");
  if (!(threshold > 0.0 && threshold < 1.0)) throw DomainError("scenario: threshold must be in (0,1)");
  if (gap_tolerance < 0) throw DomainError("scenario: gap_tolerance must be >= 0");
  if (max_duration_hours < 0.25) throw DomainError("scenario: max_duration_hours too small");
  for (const double m : seasonal)
    if (m < 0.0) throw DomainError("scenario: seasonal multipliers must be >= 0");
}

nlohmann::json ScenarioSpec::to_json() const {
  return nlohmann::json{{"counties", counties},
                        {"start_year", start_year},
                        {"years", years},
                        {"events_per_county_year", events_per_county_year},
                        {"duration_mu", duration_mu},
                        {"duration_sigma", duration_sigma},
                        {"severity_mu", severity_mu},
                        {"severity_sigma", severity_sigma},
                        {"max_duration_hours", max_duration_hours},
                        {"seasonal", seasonal},
                        {"noise_samples_per_year", noise_samples_per_year},
                        {"customers_min", customers_min},
                        {"customers_max", customers_max},
                        {"threshold", threshold},
                        {"gap_tolerance", gap_tolerance},
                        {"seed", seed}};
}

ScenarioSpec ScenarioSpec::from_json(const nlohmann::json& j) {
  ScenarioSpec s;
  const auto load = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  load("counties", s.counties);
  load("start_year", s.start_year);
  load("years", s.years);
  load("events_per_county_year", s.events_per_county_year);
  load("duration_mu", s.duration_mu);
  load("duration_sigma", s.duration_sigma);
  load("severity_mu", s.severity_mu);
  load("severity_sigma", s.severity_sigma);
  load("max_duration_hours", s.max_duration_hours);
  load("noise_samples_per_year", s.noise_samples_per_year);
  load("customers_min", s.customers_min);
  load("customers_max", s.customers_max);
  load("threshold", s.threshold);
  load("gap_tolerance", s.gap_tolerance);
  load("seed", s.seed);
  if (j.contains("seasonal")) {
    const auto arr = j.at("seasonal").get<std::vector<double>>();
    if (arr.size() != 12) throw DomainError("scenario: seasonal must have 12 entries");
    std::copy(arr.begin(), arr.end(), s.seasonal.begin());
  }
  s.validate();
  return s;
}

namespace {

std::string make_fips(int county_index) {
  const int per_state = 62;
  const int state = 1 + county_index / per_state;
  const int county_code = 1 + 2 * (county_index % per_state);
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%02d%03d", state, county_code);
  return std::string(buf);
}

struct SampledEvent {
  std::int64_t start_slot = 0;
  std::int64_t n_slots = 0;  // grid slots covered
  std::int64_t peak_out = 0;
};

struct MergedEvent {
  std::int64_t start_slot = 0;
  std::int64_t end_slot = 0;  // inclusive
};

struct CountyTruth {
  ingest::RecordStream stream;
  events::EventSeries series;
  features::FeatureVector fv;
  std::int64_t customers = 0;
};

double mean_or_zero(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (const double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

CountyTruth generate_county(const ScenarioSpec& spec, int county_index,
                            const features::Period& period) {
  Rng rng = Rng(spec.seed).fork(static_cast<std::uint64_t>(county_index));
  CountyTruth out;
  out.stream.fips = make_fips(county_index);

  out.customers = static_cast<std::int64_t>(std::llround(
      rng.log_uniform(static_cast<double>(spec.customers_min), static_cast<double>(spec.customers_max))));
  out.customers = std::clamp(out.customers, spec.customers_min, spec.customers_max);
  const std::int64_t total = out.customers;

  // Smallest integer count strictly above the rate threshold.
  const std::int64_t min_above = std::min<std::int64_t>(
      static_cast<std::int64_t>(std::floor(static_cast<double>(total) * spec.threshold)) + 1, total);

  double seasonal_sum = 0.0;
  for (const double m : spec.seasonal) seasonal_sum += m;

  // Sample raw events month by month.
  std::vector<SampledEvent> sampled;
  const std::int64_t max_slots =
      std::max<std::int64_t>(1, static_cast<std::int64_t>(spec.max_duration_hours / 0.25));
  for (int y = 0; y < spec.years; ++y) {
    for (int m = 0; m < 12; ++m) {
      const double lambda =
          seasonal_sum > 0.0
              ? spec.events_per_county_year * spec.seasonal[static_cast<std::size_t>(m)] / seasonal_sum
              : 0.0;
      const int n = lambda > 0.0 ? rng.poisson(lambda) : 0;
      const std::int64_t month_begin = timegrid::to_epoch(spec.start_year + y, static_cast<unsigned>(m + 1), 1);
      const std::int64_t month_end = m == 11
                                         ? timegrid::to_epoch(spec.start_year + y + 1, 1, 1)
                                         : timegrid::to_epoch(spec.start_year + y, static_cast<unsigned>(m + 2), 1);
      const std::int64_t slot_lo = (month_begin - period.begin) / kIntervalSec;
      const std::int64_t slot_hi = (month_end - period.begin) / kIntervalSec;
      for (int e = 0; e < n; ++e) {
        SampledEvent ev;
        ev.start_slot = slot_lo + static_cast<std::int64_t>(
                                      rng.uniform_int(static_cast<std::uint64_t>(slot_hi - slot_lo)));
        const double hours = std::min(rng.lognormal(spec.duration_mu, spec.duration_sigma),
                                      spec.max_duration_hours);
        ev.n_slots = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::llround(hours / 0.25)),
                                              1, max_slots);
        const double rate = rng.lognormal(spec.severity_mu, spec.severity_sigma);
        ev.peak_out = std::clamp<std::int64_t>(
            static_cast<std::int64_t>(std::llround(rate * static_cast<double>(total))), min_above,
            total);
        sampled.push_back(ev);
      }
    }
  }
  std::sort(sampled.begin(), sampled.end(), [](const SampledEvent& a, const SampledEvent& b) {
    return a.start_slot != b.start_slot ? a.start_slot < b.start_slot : a.n_slots < b.n_slots;
  });

  // Render observations; overlapping events keep the larger count per slot.
  std::vector<std::pair<std::int64_t, std::int64_t>> slot_values;  // (slot, customers_out)
  for (const SampledEvent& ev : sampled) {
    const double center = static_cast<double>(ev.n_slots - 1) / 2.0;
    for (std::int64_t j = 0; j < ev.n_slots; ++j) {
      double tri = ev.n_slots == 1
                       ? 1.0
                       : 1.0 - std::fabs(static_cast<double>(j) - center) / (center + 1.0);
      std::int64_t value =
          min_above + static_cast<std::int64_t>(std::llround(
                          static_cast<double>(ev.peak_out - min_above) * tri));
      if (j == (ev.n_slots - 1) / 2) value = ev.peak_out;  // the peak is always realized
      slot_values.emplace_back(ev.start_slot + j, value);
    }
  }
  std::sort(slot_values.begin(), slot_values.end());
  std::vector<std::pair<std::int64_t, std::int64_t>> event_samples;
  event_samples.reserve(slot_values.size());
  for (const auto& [slot, value] : slot_values) {
    if (!event_samples.empty() && event_samples.back().first == slot)
      event_samples.back().second = std::max(event_samples.back().second, value);
    else
      event_samples.emplace_back(slot, value);
  }

  // Ground-truth events: sampled intervals merged whenever extraction could
  // not tell them apart (overlap, adjacency, or a tolerated reporting gap).
  std::vector<MergedEvent> merged;
  for (const SampledEvent& ev : sampled) {
    const std::int64_t lo = ev.start_slot;
    const std::int64_t hi = ev.start_slot + ev.n_slots - 1;
    if (!merged.empty() && lo <= merged.back().end_slot + 1 + spec.gap_tolerance)
      merged.back().end_slot = std::max(merged.back().end_slot, hi);
    else
      merged.push_back({lo, hi});
  }

  // Noise observations sit strictly outside merged event spans so they cannot
  // split or bridge a run.
  std::vector<std::pair<std::int64_t, std::int64_t>> noise_samples;
  const std::int64_t period_slots = (period.end - period.begin) / kIntervalSec;
  const int n_noise = spec.noise_samples_per_year > 0.0
                          ? rng.poisson(spec.noise_samples_per_year * spec.years)
                          : 0;
  std::unordered_set<std::int64_t> used_noise;
  for (int i = 0; i < n_noise; ++i) {
    for (int attempt = 0; attempt < 50; ++attempt) {
      const std::int64_t slot =
          static_cast<std::int64_t>(rng.uniform_int(static_cast<std::uint64_t>(period_slots)));
      const auto it = std::upper_bound(
          merged.begin(), merged.end(), slot,
          [](std::int64_t s, const MergedEvent& m) { return s < m.start_slot; });
      const bool inside = it != merged.begin() && std::prev(it)->end_slot >= slot;
      if (inside) continue;
      if (!used_noise.insert(slot).second) continue;
      noise_samples.emplace_back(slot, static_cast<std::int64_t>(rng.uniform_int(
                                           static_cast<std::uint64_t>(min_above))));
      break;
    }
  }

  // Assemble the stream.
  std::vector<std::pair<std::int64_t, std::int64_t>> all_samples = event_samples;
  all_samples.insert(all_samples.end(), noise_samples.begin(), noise_samples.end());
  std::sort(all_samples.begin(), all_samples.end());
  out.stream.records.reserve(all_samples.size());
  for (const auto& [slot, value] : all_samples)
    out.stream.records.push_back({period.begin + slot * kIntervalSec, value});

  // Event summaries straight from the construction.
  out.series.fips = out.stream.fips;
  const double denom = static_cast<double>(total);
  for (const MergedEvent& m : merged) {
    const auto lo = std::lower_bound(
        event_samples.begin(), event_samples.end(), std::make_pair(m.start_slot, std::int64_t{0}));
    events::OutageEvent e;
    e.fips = out.stream.fips;
    e.start = period.begin + m.start_slot * kIntervalSec;
    e.end = period.begin + m.end_slot * kIntervalSec;
    e.duration_h = static_cast<double>(m.end_slot - m.start_slot + 1) * timegrid::kIntervalHours;
    std::int64_t sum_out = 0;
    for (auto it = lo; it != event_samples.end() && it->first <= m.end_slot; ++it) {
      e.peak_out = std::max(e.peak_out, it->second);
      sum_out += it->second;
      ++e.sample_count;
    }
    e.peak_rate = static_cast<double>(e.peak_out) / denom;
    e.mean_rate = static_cast<double>(sum_out) / (static_cast<double>(e.sample_count) * denom);
    e.customer_hours = static_cast<double>(sum_out) * timegrid::kIntervalHours;
    out.series.events.push_back(std::move(e));
  }
  out.series.inter_event_gaps_days = events::event_gaps(out.series);

  // Features recomputed from the merged summaries, independently of the
  // feature module's code path.
  features::FeatureVector& f = out.fv;
  const auto& evs = out.series.events;
  f[features::kNEvents] = static_cast<double>(evs.size());
  {
    std::vector<double> rates, durations;
    double cum = 0.0, peak_ratio = 0.0, cust_hours = 0.0;
    for (const auto& e : evs) {
      rates.push_back(e.mean_rate * 100.0);
      durations.push_back(e.duration_h / 24.0);
      cum += static_cast<double>(e.peak_out);
      peak_ratio = std::max(peak_ratio, e.peak_rate * 100.0);
      cust_hours += e.customer_hours;
    }
    f[features::kAvgOutageRate] = mean_or_zero(rates);
    f[features::kAvgDuration] = mean_or_zero(durations);
    f[features::kCumCustomersAffected] = cum;
    f[features::kPeakCustomersRatio] = peak_ratio;
    f[features::kAvgDurationPerCustomer] = cust_hours / denom;
  }
  f[features::kAvgInterEventTime] = mean_or_zero(out.series.inter_event_gaps_days);

  {  // Month-over-month change of raw totals, straight from the samples.
    const std::int64_t first_month = timegrid::month_index(period.begin);
    const std::int64_t n_months = timegrid::month_index(period.end - 1) - first_month + 1;
    std::vector<double> monthly(static_cast<std::size_t>(n_months), 0.0);
    for (const auto& [slot, value] : all_samples) {
      const std::int64_t ts = period.begin + slot * kIntervalSec;
      if (ts >= period.end) continue;
      monthly[static_cast<std::size_t>(timegrid::month_index(ts) - first_month)] +=
          static_cast<double>(value);
    }
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t t = 0; t + 1 < monthly.size(); ++t) {
      if (monthly[t] <= 0.0) continue;
      sum += (monthly[t + 1] - monthly[t]) / monthly[t] * 100.0;
      ++pairs;
    }
    f[features::kAvgChangeRate] = pairs > 0 ? sum / static_cast<double>(pairs) : 0.0;
  }

  {  // Large / long subsets.
    std::vector<const events::OutageEvent*> large, long_events;
    for (const auto& e : evs) {
      if (e.peak_rate > 0.05) large.push_back(&e);
      if (e.duration_h > 12.0) long_events.push_back(&e);
    }
    const auto gaps_of = [](const std::vector<const events::OutageEvent*>& subset) {
      std::vector<double> gaps;
      for (std::size_t i = 0; i + 1 < subset.size(); ++i)
        gaps.push_back(static_cast<double>(subset[i + 1]->start - subset[i]->end) /
                       timegrid::kSecondsPerDay);
      return gaps;
    };
    f[features::kNEventsGt5Pct] = static_cast<double>(large.size());
    std::vector<double> d5;
    for (const auto* e : large) d5.push_back(e->duration_h / 24.0);
    f[features::kAvgDurationGt5Pct] = mean_or_zero(d5);
    f[features::kAvgInterEventGt5Pct] = mean_or_zero(gaps_of(large));
    f[features::kNEventsGt12h] = static_cast<double>(long_events.size());
    std::vector<double> r12;
    for (const auto* e : long_events) r12.push_back(e->mean_rate * 100.0);
    f[features::kAvgRateGt12h] = mean_or_zero(r12);
    f[features::kAvgInterEventGt12h] = mean_or_zero(gaps_of(long_events));
  }
  return out;
}

}  // namespace

SyntheticData generate_stream(const ScenarioSpec& spec) {
  spec.validate();
  SyntheticData data;
  data.period = features::years_period(spec.start_year, spec.start_year + spec.years - 1);

  std::vector<CountyTruth> truths(static_cast<std::size_t>(spec.counties));
  parallel_for(0, truths.size(), hardware_threads(), [&](std::size_t i) {
    truths[i] = generate_county(spec, static_cast<int>(i), data.period);
  });

  data.truth_features.period_tag = data.period.tag;
  for (CountyTruth& t : truths) {
    data.truth_features.fips.push_back(t.stream.fips);
    data.truth_features.rows.push_back(t.fv);
    data.customers.push_back(t.customers);
    data.truth_events.push_back(std::move(t.series));
    data.streams.push_back(std::move(t.stream));
  }
  return data;
}

void write_customer_csv(std::ostream& out, const SyntheticData& data, const ScenarioSpec& spec) {
  out << "fips,year,customers_total\n";
  for (std::size_t i = 0; i < data.streams.size(); ++i)
    for (int y = 0; y < spec.years; ++y)
      out << data.streams[i].fips << ',' << spec.start_year + y << ',' << data.customers[i] << '\n';
}

std::map<std::string, std::string> nri_from_truth(const SyntheticData& data, std::uint64_t seed) {
  const std::size_t n = data.truth_features.rows.size();
  const auto column_scaled = [&](int feature) {
    std::vector<double> col(n);
    for (std::size_t i = 0; i < n; ++i) col[i] = data.truth_features.rows[i][feature];
    const auto [lo, hi] = std::minmax_element(col.begin(), col.end());
    const double span = *hi - *lo;
    if (span > 0.0)
      for (double& v : col) v = (v - *lo) / span;
    else
      std::fill(col.begin(), col.end(), 0.0);
    return col;
  };

  const auto cum = column_scaled(features::kCumCustomersAffected);
  const auto events_n = column_scaled(features::kNEvents);
  const auto duration = column_scaled(features::kAvgDuration);
  const auto per_customer = column_scaled(features::kAvgDurationPerCustomer);

  Rng rng(seed);
  std::vector<std::pair<double, std::size_t>> latent(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double signal =
        0.45 * cum[i] + 0.25 * events_n[i] + 0.20 * duration[i] + 0.10 * per_customer[i];
    latent[i] = {signal + 0.18 * rng.normal(), i};
  }
  std::sort(latent.begin(), latent.end());

  // Category cut points sized like the national risk table: roughly 47% of
  // counties in the lowest band.
  const auto category_at = [&](std::size_t sorted_pos) -> const char* {
    const double q = static_cast<double>(sorted_pos + 1) / static_cast<double>(n);
    if (q <= 0.47) return "Very Low";
    if (q <= 0.67) return "Relatively Low";
    if (q <= 0.82) return "Relatively Moderate";
    if (q <= 0.93) return "Relatively High";
    return "Very High";
  };

  std::map<std::string, std::string> out;
  for (std::size_t pos = 0; pos < n; ++pos)
    out[data.truth_features.fips[latent[pos].second]] = category_at(pos);
  return out;
}

void write_nri_csv(std::ostream& out, const std::map<std::string, std::string>& categories) {
  out << "fips,nri_category\n";
  for (const auto& [fips, category] : categories) out << fips << ',' << category << '\n';
}

model::LabeledDataset generate_labeled(const LabeledSpec& spec) {
  if (spec.rows < 4) throw DomainError("generate_labeled: needs at least 4 rows");
  if (spec.n_features == 0) throw DomainError("generate_labeled: needs at least 1 feature");
  if (spec.signal_strength < 0.0) throw DomainError("generate_labeled: strength must be >= 0");
  for (const std::size_t f : spec.signal_features)
    if (f >= spec.n_features) throw DomainError("generate_labeled: signal feature out of range");

  Rng rng(spec.seed);
  model::LabeledDataset out;
  std::vector<double> row(spec.n_features);
  for (std::size_t i = 0; i < spec.rows; ++i) {
    for (std::size_t f = 0; f < spec.n_features; ++f) row[f] = rng.uniform();
    double score = 0.0;
    for (const std::size_t f : spec.signal_features) score += row[f] - 0.5;
    const double p = model::sigmoid(spec.signal_strength * score);
    out.x.append_row(row);
    out.y.push_back(rng.uniform() < p ? 1 : 0);
  }
  return out;
}

}  // namespace psvi::synth
