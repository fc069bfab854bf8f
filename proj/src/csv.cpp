#include "psvi/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>

#include "psvi/errors.hpp"

namespace psvi::csv {

Reader::Reader(std::istream& in) : in_(in) {
  std::string line;
  if (!std::getline(in_, line)) throw SchemaError("CSV input is empty (missing header)");
  ++line_;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string_view> fields;
  split_line(line, fields);
  header_.reserve(fields.size());
  for (const auto f : fields) header_.emplace_back(f);
}

int Reader::column(std::string_view name) const {
  for (std::size_t i = 0; i < header_.size(); ++i)
    if (header_[i] == name) return static_cast<int>(i);
  return -1;
}

int Reader::require_column(std::string_view name) const {
  const int idx = column(name);
  if (idx < 0) throw SchemaError("required column '" + std::string(name) + "' not found in header");
  return idx;
}

bool Reader::next_row(std::vector<std::string_view>& fields) {
  while (std::getline(in_, buf_)) {
    ++line_;
    if (!buf_.empty() && buf_.back() == '\r') buf_.pop_back();
    if (buf_.empty()) continue;
    split_line(buf_, fields);
    return true;
  }
  return false;
}

void split_line(std::string_view line, std::vector<std::string_view>& fields) {
  fields.clear();
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return std::string(buf);
}

std::string join_row(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out.push_back(',');
    out += fields[i];
  }
  out.push_back('\n');
  return out;
}

}  // namespace psvi::csv
