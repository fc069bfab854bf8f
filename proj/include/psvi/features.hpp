#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "psvi/events.hpp"
#include "psvi/ingest.hpp"

namespace psvi::features {

inline constexpr int kFeatureCount = 14;

// Fixed feature order; every matrix, model and weight vector follows it.
enum Feature : int {
  kNEvents = 0,
  kAvgOutageRate,            // % over events
  kAvgDuration,              // days
  kAvgInterEventTime,        // days
  kCumCustomersAffected,     // customers
  kPeakCustomersRatio,       // %
  kAvgChangeRate,            // % month over month
  kAvgDurationPerCustomer,   // hours
  kNEventsGt5Pct,
  kAvgDurationGt5Pct,        // days
  kAvgInterEventGt5Pct,      // days
  kNEventsGt12h,
  kAvgRateGt12h,             // %
  kAvgInterEventGt12h,       // days
};

extern const std::array<const char*, kFeatureCount> kFeatureNames;

// Which vulnerability dimension each feature belongs to.
extern const std::array<const char*, kFeatureCount> kFeatureDimensions;
inline constexpr const char* kDimensionFrequency = "frequency";
inline constexpr const char* kDimensionIntensity = "intensity";
inline constexpr const char* kDimensionDuration = "duration";

struct FeatureVector {
  std::array<double, kFeatureCount> v{};

  double& operator[](int i) { return v[static_cast<std::size_t>(i)]; }
  double operator[](int i) const { return v[static_cast<std::size_t>(i)]; }
};

// Half-open UTC time range [begin, end).
struct Period {
  std::int64_t begin = 0;
  std::int64_t end = 0;
  std::string tag;  // e.g. "2014-2023" or "2019"

  bool contains(std::int64_t t) const { return t >= begin && t < end; }
};

Period year_period(int year);
Period years_period(int first_year, int last_year);

struct FeatureMatrix {
  std::vector<std::string> fips;       // row order
  std::vector<FeatureVector> rows;
  std::string period_tag;

  std::size_t size() const { return rows.size(); }
};

struct FeatureOptions {
  double large_event_rate = 0.05;   // peak_rate strictly above -> "large" event
  double long_event_hours = 12.0;   // duration strictly above -> "long" event
  // Default counts each event's peak once; sample-sum mode instead adds every
  // observation, double-counting customers across a long event.
  bool cum_affected_sample_sum = false;
};

// All 14 features for one county over `period`. Events are attributed to the
// period by their start instant. Subset averages over an empty subset are 0.
FeatureVector compute_features(const events::EventSeries& series,
                               const ingest::RecordStream& stream, std::int64_t customers_total,
                               const Period& period, const FeatureOptions& options = {});

struct MonthlyChange {
  double value = 0.0;
  bool degenerate = false;  // no month pair with a nonzero base
};

// Mean month-over-month percentage change of raw customers_out totals.
MonthlyChange monthly_change_rate(const ingest::RecordStream& stream, const Period& period);

struct NormalizationParams {
  std::array<double, kFeatureCount> min{};
  std::array<double, kFeatureCount> max{};
  std::array<bool, kFeatureCount> constant{};  // degenerate columns, mapped to 0
};

struct NormalizedMatrix {
  FeatureMatrix matrix;
  NormalizationParams params;
};

// Per-column (x - min) / (max - min) across counties; needs >= 2 rows.
NormalizedMatrix minmax_normalize(const FeatureMatrix& input);

void write_features_csv(std::ostream& out, const FeatureMatrix& matrix);
FeatureMatrix read_features_csv(std::istream& in);

}  // namespace psvi::features
