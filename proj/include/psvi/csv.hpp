#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace psvi::csv {

// Minimal streaming CSV reader for the engine's flat file formats: comma
// separated, first line is the header, no quoting. Field views stay valid
// until the next call to next_row().
class Reader {
 public:
  explicit Reader(std::istream& in);

  const std::vector<std::string>& header() const { return header_; }

  // Column index by name, or -1.
  int column(std::string_view name) const;

  // Column index by name; throws SchemaError naming the column when absent.
  int require_column(std::string_view name) const;

  bool next_row(std::vector<std::string_view>& fields);

  // 1-based line number of the row most recently returned.
  std::size_t line_number() const { return line_; }

 private:
  std::istream& in_;
  std::vector<std::string> header_;
  std::string buf_;
  std::size_t line_ = 0;
};

void split_line(std::string_view line, std::vector<std::string_view>& fields);

// Shortest decimal form that round-trips to the same double. Used everywhere
// a file must reload bit-exactly.
std::string format_double(double v);

std::string format_fixed(double v, int decimals);

std::string join_row(const std::vector<std::string>& fields);

}  // namespace psvi::csv
