#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace psvi::ingest {

// One county observation: number of customers without power at a grid instant.
struct RecordSample {
  std::int64_t timestamp = 0;  // UTC epoch seconds, multiple of 900
  std::int64_t customers_out = 0;
};

// Time-ordered per-county stream. Timestamps strictly increase.
struct RecordStream {
  std::string fips;
  std::vector<RecordSample> records;
};

struct RejectedRow {
  std::string fips;
  std::string timestamp;
  std::string reason;
};

struct ParseStats {
  std::size_t total_rows = 0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t duplicates_merged = 0;  // same (fips, timestamp), max kept
  std::size_t snapped = 0;            // off-grid timestamps snapped within tolerance
};

// Maps the required logical fields onto CSV column names.
struct ColumnSchema {
  std::string fips = "fips";
  std::string timestamp = "timestamp";
  std::string customers_out = "customers_out";
};

struct ParseResult {
  std::vector<RecordStream> streams;  // sorted by fips
  std::vector<RejectedRow> rejects;
  ParseStats stats;
};

using FipsFilter = std::function<bool(std::string_view)>;

// Parses outage records grouped by county. Malformed rows are reported in
// `rejects`, never silently dropped: accepted + rejected == total rows.
// An optional filter restricts parsing to a subset of counties, which is how
// the pipeline makes county-partitioned passes over files larger than memory.
ParseResult parse_records(std::istream& in, const ColumnSchema& schema = {},
                          const FipsFilter& filter = nullptr);

void write_records_csv(std::ostream& out, const std::vector<RecordStream>& streams);
void write_rejects_csv(std::ostream& out, const std::vector<RejectedRow>& rejects);

bool valid_fips(std::string_view s);

// Least-squares line through (year, customers) pairs evaluated at `year`,
// rounded and clamped to >= 1. An exact (fips, year) entry is returned
// verbatim; a single known year extrapolates as a constant.
std::int64_t extrapolate_customer_base(const std::vector<std::pair<int, std::int64_t>>& by_year,
                                       int year);

// Per-county, per-year total-customer denominators.
class CustomerBaseTable {
 public:
  void add(const std::string& fips, int year, std::int64_t customers_total);

  static CustomerBaseTable from_csv(std::istream& in);

  bool has_county(std::string_view fips) const;

  // Exact entry or extrapolation; throws DomainError when the county has no
  // entries at all (missing denominator; county is excluded upstream).
  std::int64_t customers_total(const std::string& fips, int year) const;

  std::vector<std::string> counties() const;

 private:
  std::map<std::string, std::vector<std::pair<int, std::int64_t>>, std::less<>> entries_;
};

struct Rate {
  double value = 0.0;
  bool over_unity = false;  // above 1 happens in raw feeds; flagged, not clipped
};

Rate outage_rate(std::int64_t customers_out, std::int64_t customers_total);

}  // namespace psvi::ingest
