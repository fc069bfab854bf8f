#include "psvi/timegrid.hpp"

#include <array>
#include <charconv>
#include <cstdio>

namespace psvi::timegrid {

// Howard Hinnant's algorithms for the proleptic Gregorian calendar.
std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);                      // [0, 399]
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;            // [0, 365]
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;                     // [0, 146096]
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

CivilDate civil_from_days(std::int64_t z) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);                   // [0, 146096]
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;     // [0, 399]
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);                   // [0, 365]
  const unsigned mp = (5 * doy + 2) / 153;                                        // [0, 11]
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;                                // [1, 31]
  const unsigned m = mp + (mp < 10 ? 3 : -9);                                     // [1, 12]
  return CivilDate{static_cast<int>(y + (m <= 2)), m, d};
}

std::int64_t to_epoch(int year, unsigned month, unsigned day, unsigned hour, unsigned minute,
                      unsigned second) {
  return days_from_civil(year, month, day) * 86400 + hour * 3600 + minute * 60 + second;
}

CivilTime civil_from_epoch(std::int64_t epoch) {
  std::int64_t days = epoch / 86400;
  std::int64_t rem = epoch % 86400;
  if (rem < 0) {
    rem += 86400;
    --days;
  }
  CivilTime out;
  out.date = civil_from_days(days);
  out.hour = static_cast<unsigned>(rem / 3600);
  out.minute = static_cast<unsigned>((rem % 3600) / 60);
  out.second = static_cast<unsigned>(rem % 60);
  return out;
}

namespace {

bool parse_uint(std::string_view s, std::size_t pos, std::size_t len, unsigned& out) {
  if (pos + len > s.size()) return false;
  unsigned v = 0;
  for (std::size_t i = pos; i < pos + len; ++i) {
    const char c = s[i];
    if (c < '0' || c > '9') return false;
    v = v * 10 + static_cast<unsigned>(c - '0');
  }
  out = v;
  return true;
}

}  // namespace

std::optional<std::int64_t> parse_timestamp(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r'))
    text.remove_suffix(1);
  if (text.empty()) return std::nullopt;

  // Integer epoch seconds (optionally negative).
  const bool all_digits =
      text.find_first_not_of("0123456789", text.front() == '-' ? 1 : 0) == std::string_view::npos &&
      !(text.size() == 1 && text.front() == '-');
  if (all_digits) {
    std::int64_t v = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size()) return std::nullopt;
    return v;
  }

  // RFC 3339: YYYY-MM-DD[T ]hh:mm:ss[.frac][Z|+00:00|-00:00]
  unsigned year, month, day, hour, minute, second;
  if (text.size() < 19) return std::nullopt;
  if (!parse_uint(text, 0, 4, year) || text[4] != '-' || !parse_uint(text, 5, 2, month) ||
      text[7] != '-' || !parse_uint(text, 8, 2, day))
    return std::nullopt;
  if (text[10] != 'T' && text[10] != 't' && text[10] != ' ') return std::nullopt;
  if (!parse_uint(text, 11, 2, hour) || text[13] != ':' || !parse_uint(text, 14, 2, minute) ||
      text[16] != ':' || !parse_uint(text, 17, 2, second))
    return std::nullopt;
  if (month < 1 || month > 12 || day < 1 || day > 31 || hour > 23 || minute > 59 || second > 60)
    return std::nullopt;

  std::size_t pos = 19;
  double frac = 0.0;
  if (pos < text.size() && text[pos] == '.') {
    ++pos;
    double scale = 0.1;
    bool any = false;
    while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
      frac += scale * (text[pos] - '0');
      scale *= 0.1;
      ++pos;
      any = true;
    }
    if (!any) return std::nullopt;
  }
  if (pos < text.size()) {
    const std::string_view tz = text.substr(pos);
    if (!(tz == "Z" || tz == "z" || tz == "+00:00" || tz == "-00:00" || tz == "+0000"))
      return std::nullopt;
  }
  std::int64_t epoch = to_epoch(static_cast<int>(year), month, day, hour, minute, second);
  if (frac >= 0.5) ++epoch;
  return epoch;
}

std::string format_rfc3339(std::int64_t epoch) {
  const CivilTime t = civil_from_epoch(epoch);
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02u:%02u:%02uZ", t.date.year, t.date.month,
                t.date.day, t.hour, t.minute, t.second);
  return std::string(buf);
}

std::optional<std::int64_t> snap_to_grid(std::int64_t epoch, std::int64_t tolerance_sec) {
  std::int64_t rem = epoch % kIntervalSec;
  if (rem < 0) rem += kIntervalSec;
  if (rem == 0) return epoch;
  const std::int64_t down = epoch - rem;
  const std::int64_t up = down + kIntervalSec;
  if (rem <= tolerance_sec) return down;
  if (kIntervalSec - rem <= tolerance_sec) return up;
  return std::nullopt;
}

int year_of(std::int64_t epoch) { return civil_from_epoch(epoch).date.year; }

std::int64_t month_index(std::int64_t epoch) {
  const CivilDate d = civil_from_epoch(epoch).date;
  return static_cast<std::int64_t>(d.year) * 12 + (d.month - 1);
}

std::int64_t month_start(std::int64_t epoch) {
  const CivilDate d = civil_from_epoch(epoch).date;
  return to_epoch(d.year, d.month, 1);
}

}  // namespace psvi::timegrid
