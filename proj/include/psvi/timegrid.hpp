#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace psvi::timegrid {

// All instants are UTC epoch seconds. The observation grid is quarter-hourly;
// epoch 0 falls on the grid, so grid instants are exact multiples of 900 s.
inline constexpr std::int64_t kIntervalSec = 900;
inline constexpr double kIntervalHours = 0.25;
inline constexpr double kSecondsPerDay = 86400.0;

struct CivilDate {
  int year;
  unsigned month;  // 1..12
  unsigned day;    // 1..31
};

struct CivilTime {
  CivilDate date;
  unsigned hour;
  unsigned minute;
  unsigned second;
};

// Days since 1970-01-01 for a proleptic Gregorian date.
std::int64_t days_from_civil(int year, unsigned month, unsigned day);
CivilDate civil_from_days(std::int64_t days);

std::int64_t to_epoch(int year, unsigned month, unsigned day, unsigned hour = 0, unsigned minute = 0,
                      unsigned second = 0);
CivilTime civil_from_epoch(std::int64_t epoch);

// Accepts RFC 3339 UTC ("2020-01-31T12:45:00Z", optional fractional seconds,
// "+00:00" suffix allowed) or a plain integer epoch-second count.
std::optional<std::int64_t> parse_timestamp(std::string_view text);

std::string format_rfc3339(std::int64_t epoch);

// Nearest grid instant if within tolerance, otherwise nullopt.
std::optional<std::int64_t> snap_to_grid(std::int64_t epoch, std::int64_t tolerance_sec = 60);

inline bool on_grid(std::int64_t epoch) { return epoch % kIntervalSec == 0; }

int year_of(std::int64_t epoch);

// Monotone month counter (year*12 + month-1), for calendar-month arithmetic.
std::int64_t month_index(std::int64_t epoch);

// First instant of the month holding `epoch`.
std::int64_t month_start(std::int64_t epoch);

}  // namespace psvi::timegrid
