#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace complearn::harness {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Column index by header name; throws when absent.
  std::size_t column(const std::string& name) const;
};

// Minimal RFC 4180 reader: quoted fields may hold commas and doubled quotes, not newlines.
CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);

// Quotes the field only when it contains a comma, quote or newline.
std::string csv_field(const std::string& value);
// Shortest text that round-trips a double ("nan" for NaN).
std::string csv_number(double value);
double parse_number(const std::string& text);

}  // namespace complearn::harness
