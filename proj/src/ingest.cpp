#include "psvi/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>
#include <unordered_map>

#include "psvi/csv.hpp"
#include "psvi/errors.hpp"
#include "psvi/timegrid.hpp"

namespace psvi::ingest {

bool valid_fips(std::string_view s) {
  if (s.size() != 5) return false;
  return std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

namespace {

std::optional<std::int64_t> parse_int(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.empty()) return std::nullopt;
  std::int64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace

ParseResult parse_records(std::istream& in, const ColumnSchema& schema, const FipsFilter& filter) {
  csv::Reader reader(in);
  const int fips_col = reader.require_column(schema.fips);
  const int ts_col = reader.require_column(schema.timestamp);
  const int out_col = reader.require_column(schema.customers_out);

  ParseResult result;
  std::unordered_map<std::string, std::vector<RecordSample>> by_county;

  std::vector<std::string_view> fields;
  const int max_col = std::max({fips_col, ts_col, out_col});
  while (reader.next_row(fields)) {
    const std::string_view fips =
        fips_col < static_cast<int>(fields.size()) ? fields[fips_col] : std::string_view{};
    if (filter && !filter(fips)) {
      // Out-of-shard rows are neither accepted nor rejected; the caller
      // accounts for them across passes. The filter sees the raw fips field
      // so every input row lands in exactly one shard.
      continue;
    }
    ++result.stats.total_rows;
    if (static_cast<int>(fields.size()) <= max_col) {
      result.rejects.push_back({std::string(fips), "", "too few fields"});
      ++result.stats.rejected;
      continue;
    }
    const std::string_view ts_text = fields[ts_col];
    if (!valid_fips(fips)) {
      result.rejects.push_back({std::string(fips), std::string(ts_text), "malformed fips"});
      ++result.stats.rejected;
      continue;
    }
    const auto epoch = timegrid::parse_timestamp(ts_text);
    if (!epoch) {
      result.rejects.push_back({std::string(fips), std::string(ts_text), "unparseable timestamp"});
      ++result.stats.rejected;
      continue;
    }
    const auto snapped = timegrid::snap_to_grid(*epoch);
    if (!snapped) {
      result.rejects.push_back({std::string(fips), std::string(ts_text), "timestamp off 15-minute grid"});
      ++result.stats.rejected;
      continue;
    }
    if (*snapped != *epoch) ++result.stats.snapped;
    const auto out = parse_int(fields[out_col]);
    if (!out) {
      result.rejects.push_back({std::string(fips), std::string(ts_text), "unparseable customers_out"});
      ++result.stats.rejected;
      continue;
    }
    if (*out < 0) {
      result.rejects.push_back({std::string(fips), std::string(ts_text), "negative customers_out"});
      ++result.stats.rejected;
      continue;
    }
    by_county[std::string(fips)].push_back({*snapped, *out});
    ++result.stats.accepted;
  }

  result.streams.reserve(by_county.size());
  for (auto& [fips, records] : by_county) {
    std::sort(records.begin(), records.end(), [](const RecordSample& a, const RecordSample& b) {
      return a.timestamp != b.timestamp ? a.timestamp < b.timestamp
                                        : a.customers_out > b.customers_out;
    });
    // Duplicate grid instants keep the largest reported outage.
    std::vector<RecordSample> dedup;
    dedup.reserve(records.size());
    for (const RecordSample& r : records) {
      if (!dedup.empty() && dedup.back().timestamp == r.timestamp) {
        ++result.stats.duplicates_merged;
        continue;
      }
      dedup.push_back(r);
    }
    result.streams.push_back({fips, std::move(dedup)});
  }
  std::sort(result.streams.begin(), result.streams.end(),
            [](const RecordStream& a, const RecordStream& b) { return a.fips < b.fips; });
  return result;
}

void write_records_csv(std::ostream& out, const std::vector<RecordStream>& streams) {
  out << "fips,timestamp,customers_out\n";
  for (const RecordStream& s : streams)
    for (const RecordSample& r : s.records)
      out << s.fips << ',' << timegrid::format_rfc3339(r.timestamp) << ',' << r.customers_out
          << '\n';
}

void write_rejects_csv(std::ostream& out, const std::vector<RejectedRow>& rejects) {
  out << "fips,timestamp,reason\n";
  for (const RejectedRow& r : rejects)
    out << r.fips << ',' << r.timestamp << ',' << r.reason << '\n';
}

std::int64_t extrapolate_customer_base(const std::vector<std::pair<int, std::int64_t>>& by_year,
                                       int year) {
  if (by_year.empty()) throw DomainError("extrapolate_customer_base: no entries for county");
  for (const auto& [y, total] : by_year)
    if (y == year) return total;
  if (by_year.size() == 1) return std::max<std::int64_t>(1, by_year.front().second);

  // Simple least squares on (year, total).
  const double n = static_cast<double>(by_year.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [y, total] : by_year) {
    const double x = static_cast<double>(y);
    const double v = static_cast<double>(total);
    sx += x;
    sy += v;
    sxx += x * x;
    sxy += x * v;
  }
  const double denom = n * sxx - sx * sx;
  double predicted;
  if (denom == 0.0) {
    predicted = sy / n;
  } else {
    const double slope = (n * sxy - sx * sy) / denom;
    const double intercept = (sy - slope * sx) / n;
    predicted = slope * static_cast<double>(year) + intercept;
  }
  const std::int64_t rounded = static_cast<std::int64_t>(std::llround(predicted));
  return std::max<std::int64_t>(1, rounded);
}

void CustomerBaseTable::add(const std::string& fips, int year, std::int64_t customers_total) {
  if (customers_total < 1) throw DomainError("customer base entry must be >= 1 for fips " + fips);
  auto& rows = entries_[fips];
  for (const auto& [y, total] : rows)
    if (y == year)
      throw DomainError("duplicate customer base entry for fips " + fips + " year " +
                        std::to_string(year));
  rows.emplace_back(year, customers_total);
  std::sort(rows.begin(), rows.end());
}

CustomerBaseTable CustomerBaseTable::from_csv(std::istream& in) {
  csv::Reader reader(in);
  const int fips_col = reader.require_column("fips");
  const int year_col = reader.require_column("year");
  const int total_col = reader.require_column("customers_total");

  CustomerBaseTable table;
  std::vector<std::string_view> fields;
  while (reader.next_row(fields)) {
    if (static_cast<int>(fields.size()) <= std::max({fips_col, year_col, total_col}))
      throw SchemaError("customer base row " + std::to_string(reader.line_number()) +
                        " has too few fields");
    const std::string fips(fields[fips_col]);
    const auto year = parse_int(fields[year_col]);
    const auto total = parse_int(fields[total_col]);
    if (!valid_fips(fips) || !year || !total || *total < 1)
      throw SchemaError("invalid customer base row at line " + std::to_string(reader.line_number()));
    table.add(fips, static_cast<int>(*year), *total);
  }
  return table;
}

bool CustomerBaseTable::has_county(std::string_view fips) const {
  return entries_.find(fips) != entries_.end();
}

std::int64_t CustomerBaseTable::customers_total(const std::string& fips, int year) const {
  const auto it = entries_.find(fips);
  if (it == entries_.end())
    throw DomainError("no customer base entries for fips " + fips + " (missing denominator)");
  return extrapolate_customer_base(it->second, year);
}

std::vector<std::string> CustomerBaseTable::counties() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [fips, rows] : entries_) out.push_back(fips);
  return out;
}

Rate outage_rate(std::int64_t customers_out, std::int64_t customers_total) {
  if (customers_total < 1) throw DomainError("outage_rate: customers_total must be >= 1");
  Rate r;
  r.value = static_cast<double>(customers_out) / static_cast<double>(customers_total);
  r.over_unity = r.value > 1.0;
  return r;
}

}  // namespace psvi::ingest
