#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "psvi/ingest.hpp"

namespace psvi::events {

// A maximal run of above-threshold observations.
//
// start/end are the first and last above-threshold samples. Tolerated
// reporting gaps inside a run contribute to duration (the run spans them) but
// not to the sample statistics, which cover observed samples only.
struct OutageEvent {
  std::string fips;
  std::int64_t start = 0;
  std::int64_t end = 0;
  double duration_h = 0.0;       // ((end - start) / 15 min + 1) * 0.25
  std::int64_t peak_out = 0;     // max customers_out among observed samples
  double peak_rate = 0.0;        // peak_out / start-year customer total
  double mean_rate = 0.0;        // mean of per-sample rates, start-year denominator
  double customer_hours = 0.0;   // sum of customers_out * 0.25 over observed samples
  std::int64_t sample_count = 0; // observed above-threshold samples
};

struct EventSeries {
  std::string fips;
  std::vector<OutageEvent> events;             // sorted, non-overlapping
  std::vector<double> inter_event_gaps_days;   // end(i) -> start(i+1)
};

struct ExtractParams {
  // An observation counts toward an event when its rate is strictly above
  // this fraction.
  double threshold = 0.001;
  // Number of consecutive missing 15-minute reports a run survives. One
  // absent report does not split an event; two in a row do.
  int gap_tolerance = 1;
};

// Total-customer denominator for a given calendar year.
using YearTotals = std::function<std::int64_t(int year)>;

// Incremental extractor. Feed time-contiguous chunks of one county's stream
// in order; the open-run accumulator carries across chunks, so chunked and
// single-pass extraction produce identical series.
class StreamingExtractor {
 public:
  StreamingExtractor(std::string fips, YearTotals totals, ExtractParams params = {});

  void feed(std::span<const ingest::RecordSample> chunk);
  EventSeries finish();

 private:
  void open_run(const ingest::RecordSample& sample);
  void extend_run(const ingest::RecordSample& sample);
  void close_run();

  std::string fips_;
  YearTotals totals_;
  ExtractParams params_;
  EventSeries series_;
  // Open-run accumulator.
  bool run_open_ = false;
  std::int64_t run_start_ = 0;
  std::int64_t run_last_ = 0;
  std::int64_t run_peak_ = 0;
  std::int64_t run_sum_out_ = 0;
  std::int64_t run_samples_ = 0;
  std::int64_t last_timestamp_ = 0;
  bool saw_any_ = false;
};

EventSeries extract_events(const ingest::RecordStream& stream, const YearTotals& totals,
                           ExtractParams params = {});

// Fixed denominator across all years.
EventSeries extract_events(const ingest::RecordStream& stream, std::int64_t customers_total,
                           ExtractParams params = {});

// Gaps between consecutive events in days; empty when fewer than two events.
std::vector<double> event_gaps(const EventSeries& series);

void write_events_csv(std::ostream& out, const std::vector<EventSeries>& all);

}  // namespace psvi::events
