#pragma once

/// Minimal comma-separated writer/reader. Doubles are written in
/// shortest round-trip form, so output is byte-stable and re-parses exactly.

#include <charconv>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace l96cal {

std::string format_double(double v);
double parse_double(std::string_view s);

class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& os) : os_(os) {}

  void header(const std::vector<std::string>& columns);
  CsvWriter& field(double v);
  CsvWriter& field(long long v);
  CsvWriter& field(int v) { return field(static_cast<long long>(v)); }
  CsvWriter& field(std::size_t v) { return field(static_cast<long long>(v)); }
  CsvWriter& field(bool v) { return field(static_cast<long long>(v ? 1 : 0)); }
  CsvWriter& field(std::string_view s);
  CsvWriter& field(const char* s) { return field(std::string_view(s)); }
  void end_row();

 private:
  void sep();
  std::ostream& os_;
  bool row_open_ = false;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// RFC 4180 style: fields containing commas or quotes are double-quoted.
CsvTable read_csv(std::istream& is);

}  // namespace l96cal
