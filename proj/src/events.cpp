#include "psvi/events.hpp"

#include <algorithm>
#include <ostream>
#include <utility>

#include "psvi/csv.hpp"
#include "psvi/errors.hpp"
#include "psvi/timegrid.hpp"

namespace psvi::events {

using timegrid::kIntervalSec;

StreamingExtractor::StreamingExtractor(std::string fips, YearTotals totals, ExtractParams params)
    : fips_(std::move(fips)), totals_(std::move(totals)), params_(params) {
  if (params_.threshold < 0.0) throw DomainError("extract_events: threshold must be >= 0");
  if (params_.gap_tolerance < 0) throw DomainError("extract_events: gap_tolerance must be >= 0");
  series_.fips = fips_;
}

void StreamingExtractor::open_run(const ingest::RecordSample& s) {
  run_open_ = true;
  run_start_ = s.timestamp;
  run_last_ = s.timestamp;
  run_peak_ = s.customers_out;
  run_sum_out_ = s.customers_out;
  run_samples_ = 1;
}

void StreamingExtractor::extend_run(const ingest::RecordSample& s) {
  run_last_ = s.timestamp;
  run_peak_ = std::max(run_peak_, s.customers_out);
  run_sum_out_ += s.customers_out;
  ++run_samples_;
}

void StreamingExtractor::close_run() {
  if (!run_open_) return;
  run_open_ = false;
  OutageEvent e;
  e.fips = fips_;
  e.start = run_start_;
  e.end = run_last_;
  e.duration_h = (static_cast<double>((run_last_ - run_start_) / kIntervalSec) + 1.0) *
                 timegrid::kIntervalHours;
  e.peak_out = run_peak_;
  e.sample_count = run_samples_;
  // Events spanning a year boundary use the start-year denominator for their
  // summary rates, keeping peak_rate >= mean_rate within one event.
  const double denom = static_cast<double>(totals_(timegrid::year_of(run_start_)));
  e.peak_rate = static_cast<double>(run_peak_) / denom;
  e.mean_rate = static_cast<double>(run_sum_out_) / (static_cast<double>(run_samples_) * denom);
  e.customer_hours = static_cast<double>(run_sum_out_) * timegrid::kIntervalHours;
  series_.events.push_back(std::move(e));
}

void StreamingExtractor::feed(std::span<const ingest::RecordSample> chunk) {
  for (const ingest::RecordSample& s : chunk) {
    if (s.timestamp % kIntervalSec != 0)
      throw DomainError("record stream for " + fips_ + " has off-grid timestamp");
    if (saw_any_ && s.timestamp <= last_timestamp_)
      throw DomainError("record stream for " + fips_ + " is not strictly increasing");
    if (run_open_) {
      const std::int64_t missing = (s.timestamp - run_last_) / kIntervalSec - 1;
      if (missing > params_.gap_tolerance) close_run();
    }
    const std::int64_t total = totals_(timegrid::year_of(s.timestamp));
    const double rate = ingest::outage_rate(s.customers_out, total).value;
    if (rate > params_.threshold) {
      if (run_open_)
        extend_run(s);
      else
        open_run(s);
    } else {
      close_run();
    }
    last_timestamp_ = s.timestamp;
    saw_any_ = true;
  }
}

EventSeries StreamingExtractor::finish() {
  close_run();
  series_.inter_event_gaps_days = event_gaps(series_);
  return std::move(series_);
}

EventSeries extract_events(const ingest::RecordStream& stream, const YearTotals& totals,
                           ExtractParams params) {
  StreamingExtractor ex(stream.fips, totals, params);
  ex.feed(stream.records);
  return ex.finish();
}

EventSeries extract_events(const ingest::RecordStream& stream, std::int64_t customers_total,
                           ExtractParams params) {
  return extract_events(
      stream, [customers_total](int) { return customers_total; }, params);
}

std::vector<double> event_gaps(const EventSeries& series) {
  std::vector<double> gaps;
  if (series.events.size() < 2) return gaps;
  gaps.reserve(series.events.size() - 1);
  for (std::size_t i = 0; i + 1 < series.events.size(); ++i)
    gaps.push_back(static_cast<double>(series.events[i + 1].start - series.events[i].end) /
                   timegrid::kSecondsPerDay);
  return gaps;
}

void write_events_csv(std::ostream& out, const std::vector<EventSeries>& all) {
  out << "fips,start,end,duration_h,peak_out,peak_rate,mean_rate,customer_hours\n";
  for (const EventSeries& series : all)
    for (const OutageEvent& e : series.events)
      out << e.fips << ',' << timegrid::format_rfc3339(e.start) << ','
          << timegrid::format_rfc3339(e.end) << ',' << csv::format_double(e.duration_h) << ','
          << e.peak_out << ',' << csv::format_double(e.peak_rate) << ','
          << csv::format_double(e.mean_rate) << ',' << csv::format_double(e.customer_hours)
          << '\n';
}

}  // namespace psvi::events
