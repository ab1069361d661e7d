#include "complearn/harness/csv.hpp"

#include "complearn/error.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <limits>

namespace complearn::harness {

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw InvalidArgument("CSV has no column '" + name + "'");
}

namespace {

std::vector<std::string> split_line(const std::string& line, std::size_t offset) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else {
      field += c;
    }
  }
  if (quoted) throw ParseError("unterminated quoted CSV field", offset + line.size());
  out.push_back(std::move(field));
  return out;
}

}  // namespace

CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  std::size_t offset = 0;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto fields = split_line(line, offset);
    if (first) {
      table.header = std::move(fields);
      first = false;
    } else if (!line.empty()) {
      if (fields.size() != table.header.size()) {
        throw ParseError("CSV row has " + std::to_string(fields.size()) + " fields, header has " +
                             std::to_string(table.header.size()),
                         offset);
      }
      table.rows.push_back(std::move(fields));
    }
    offset += line.size() + 1;
  }
  if (first) throw ParseError("CSV input is empty", 0);
  return table;
}

CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return read_csv(in);
}

std::string csv_field(const std::string& value) {
  if (value.find_first_of(",\"\n\r") == std::string::npos) return value;
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out += '"';
    out += (c == '\n' || c == '\r') ? ' ' : c;
  }
  return out + '"';
}

std::string csv_number(double value) {
  if (std::isnan(value)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

double parse_number(const std::string& text) {
  if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size()) throw InvalidArgument("not a number: '" + text + "'");
  return v;
}

}  // namespace complearn::harness
