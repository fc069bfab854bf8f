#include "psvi/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>

#include "psvi/csv.hpp"
#include "psvi/errors.hpp"
#include "psvi/timegrid.hpp"

namespace psvi::features {

const std::array<const char*, kFeatureCount> kFeatureNames = {
    "n_events",
    "avg_outage_rate",
    "avg_duration",
    "avg_inter_event_time",
    "cum_customers_affected",
    "peak_customers_ratio",
    "avg_change_rate",
    "avg_duration_per_customer",
    "n_events_gt5pct",
    "avg_duration_gt5pct",
    "avg_inter_event_gt5pct",
    "n_events_gt12h",
    "avg_rate_gt12h",
    "avg_inter_event_gt12h",
};

const std::array<const char*, kFeatureCount> kFeatureDimensions = {
    kDimensionFrequency,  // n_events
    kDimensionIntensity,  // avg_outage_rate
    kDimensionDuration,   // avg_duration
    kDimensionFrequency,  // avg_inter_event_time
    kDimensionIntensity,  // cum_customers_affected
    kDimensionIntensity,  // peak_customers_ratio
    kDimensionIntensity,  // avg_change_rate
    kDimensionDuration,   // avg_duration_per_customer
    kDimensionFrequency,  // n_events_gt5pct
    kDimensionDuration,   // avg_duration_gt5pct
    kDimensionFrequency,  // avg_inter_event_gt5pct
    kDimensionFrequency,  // n_events_gt12h
    kDimensionIntensity,  // avg_rate_gt12h
    kDimensionFrequency,  // avg_inter_event_gt12h
};

Period year_period(int year) {
  return {timegrid::to_epoch(year, 1, 1), timegrid::to_epoch(year + 1, 1, 1), std::to_string(year)};
}

Period years_period(int first_year, int last_year) {
  return {timegrid::to_epoch(first_year, 1, 1), timegrid::to_epoch(last_year + 1, 1, 1),
          std::to_string(first_year) + "-" + std::to_string(last_year)};
}

namespace {

constexpr double kHoursPerDay = 24.0;

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (const double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

// Gaps (days) between consecutive events of a subset, measured end -> start.
std::vector<double> subset_gaps(const std::vector<const events::OutageEvent*>& subset) {
  std::vector<double> gaps;
  for (std::size_t i = 0; i + 1 < subset.size(); ++i)
    gaps.push_back(static_cast<double>(subset[i + 1]->start - subset[i]->end) /
                   timegrid::kSecondsPerDay);
  return gaps;
}

}  // namespace

FeatureVector compute_features(const events::EventSeries& series,
                               const ingest::RecordStream& stream, std::int64_t customers_total,
                               const Period& period, const FeatureOptions& options) {
  if (customers_total < 1) throw DomainError("compute_features: customers_total must be >= 1");

  std::vector<const events::OutageEvent*> in_period;
  for (const events::OutageEvent& e : series.events)
    if (period.contains(e.start)) in_period.push_back(&e);

  FeatureVector f;
  f[kNEvents] = static_cast<double>(in_period.size());

  std::vector<double> mean_rates, durations_days;
  double cum_affected = 0.0;
  double peak_ratio = 0.0;
  double customer_hours = 0.0;
  std::vector<const events::OutageEvent*> large, long_events;
  for (const events::OutageEvent* e : in_period) {
    mean_rates.push_back(e->mean_rate * 100.0);
    durations_days.push_back(e->duration_h / kHoursPerDay);
    cum_affected += options.cum_affected_sample_sum
                        ? e->customer_hours / timegrid::kIntervalHours
                        : static_cast<double>(e->peak_out);
    peak_ratio = std::max(peak_ratio, e->peak_rate * 100.0);
    customer_hours += e->customer_hours;
    if (e->peak_rate > options.large_event_rate) large.push_back(e);
    if (e->duration_h > options.long_event_hours) long_events.push_back(e);
  }

  f[kAvgOutageRate] = mean_of(mean_rates);
  f[kAvgDuration] = mean_of(durations_days);
  f[kCumCustomersAffected] = cum_affected;
  f[kPeakCustomersRatio] = peak_ratio;
  f[kAvgDurationPerCustomer] = customer_hours / static_cast<double>(customers_total);

  f[kAvgInterEventTime] = mean_of(subset_gaps(in_period));
  f[kAvgChangeRate] = monthly_change_rate(stream, period).value;

  f[kNEventsGt5Pct] = static_cast<double>(large.size());
  {
    std::vector<double> d;
    for (const auto* e : large) d.push_back(e->duration_h / kHoursPerDay);
    f[kAvgDurationGt5Pct] = mean_of(d);
  }
  f[kAvgInterEventGt5Pct] = mean_of(subset_gaps(large));

  f[kNEventsGt12h] = static_cast<double>(long_events.size());
  {
    std::vector<double> r;
    for (const auto* e : long_events) r.push_back(e->mean_rate * 100.0);
    f[kAvgRateGt12h] = mean_of(r);
  }
  f[kAvgInterEventGt12h] = mean_of(subset_gaps(long_events));
  return f;
}

MonthlyChange monthly_change_rate(const ingest::RecordStream& stream, const Period& period) {
  if (period.end <= period.begin) throw DomainError("monthly_change_rate: empty period");
  const std::int64_t first_month = timegrid::month_index(period.begin);
  const std::int64_t last_month = timegrid::month_index(period.end - 1);
  if (last_month <= first_month)
    throw DomainError("monthly_change_rate: period must span at least two calendar months");

  const std::size_t n_months = static_cast<std::size_t>(last_month - first_month + 1);
  std::vector<double> monthly(n_months, 0.0);
  for (const ingest::RecordSample& s : stream.records) {
    if (!period.contains(s.timestamp)) continue;
    const std::int64_t m = timegrid::month_index(s.timestamp) - first_month;
    monthly[static_cast<std::size_t>(m)] += static_cast<double>(s.customers_out);
  }

  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t t = 0; t + 1 < n_months; ++t) {
    if (monthly[t] <= 0.0) continue;
    sum += (monthly[t + 1] - monthly[t]) / monthly[t] * 100.0;
    ++pairs;
  }
  if (pairs == 0) return {0.0, true};
  return {sum / static_cast<double>(pairs), false};
}

NormalizedMatrix minmax_normalize(const FeatureMatrix& input) {
  if (input.rows.size() < 2) throw DomainError("minmax_normalize: needs at least 2 counties");
  NormalizedMatrix out;
  out.matrix.fips = input.fips;
  out.matrix.period_tag = input.period_tag;
  out.matrix.rows.resize(input.rows.size());

  for (int c = 0; c < kFeatureCount; ++c) {
    double lo = input.rows[0][c], hi = input.rows[0][c];
    for (const FeatureVector& row : input.rows) {
      lo = std::min(lo, row[c]);
      hi = std::max(hi, row[c]);
    }
    out.params.min[static_cast<std::size_t>(c)] = lo;
    out.params.max[static_cast<std::size_t>(c)] = hi;
    const bool constant = hi == lo;
    out.params.constant[static_cast<std::size_t>(c)] = constant;
    for (std::size_t r = 0; r < input.rows.size(); ++r)
      out.matrix.rows[r][c] = constant ? 0.0 : (input.rows[r][c] - lo) / (hi - lo);
  }
  return out;
}

void write_features_csv(std::ostream& out, const FeatureMatrix& matrix) {
  out << "fips,period";
  for (const char* name : kFeatureNames) out << ',' << name;
  out << '\n';
  for (std::size_t r = 0; r < matrix.rows.size(); ++r) {
    out << matrix.fips[r] << ',' << matrix.period_tag;
    for (int c = 0; c < kFeatureCount; ++c) out << ',' << csv::format_double(matrix.rows[r][c]);
    out << '\n';
  }
}

FeatureMatrix read_features_csv(std::istream& in) {
  csv::Reader reader(in);
  const int fips_col = reader.require_column("fips");
  const int period_col = reader.require_column("period");
  std::array<int, kFeatureCount> cols{};
  for (int c = 0; c < kFeatureCount; ++c)
    cols[static_cast<std::size_t>(c)] = reader.require_column(kFeatureNames[static_cast<std::size_t>(c)]);

  FeatureMatrix matrix;
  std::vector<std::string_view> fields;
  while (reader.next_row(fields)) {
    matrix.fips.emplace_back(fields[fips_col]);
    if (matrix.period_tag.empty()) matrix.period_tag = std::string(fields[period_col]);
    FeatureVector fv;
    for (int c = 0; c < kFeatureCount; ++c) {
      const std::string_view s = fields[cols[static_cast<std::size_t>(c)]];
      double v = 0.0;
      const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
      if (res.ec != std::errc())
        throw SchemaError("bad feature value at line " + std::to_string(reader.line_number()));
      fv[c] = v;
    }
    matrix.rows.push_back(fv);
  }
  return matrix;
}

}  // namespace psvi::features
