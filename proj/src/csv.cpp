#include "causalcmp/csv.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "causalcmp/errors.hpp"

namespace causalcmp {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      out.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  out.push_back(field);
  return out;
}

}  // namespace

bool CsvTable::has_column(const std::string& name) const {
  return std::find(header.begin(), header.end(), name) != header.end();
}

std::size_t CsvTable::column(const std::string& name) const {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw MissingColumnError("missing column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open file: " + path);
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw Error("empty file: " + path);
  t.header = split_line(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split_line(line);
    if (fields.size() != t.header.size())
      throw Error(path + ": row " + std::to_string(t.rows.size() + 1) +
                  " has " + std::to_string(fields.size()) + " fields, expected " +
                  std::to_string(t.header.size()));
    t.rows.push_back(std::move(fields));
  }
  return t;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write file: " + path);
  for (std::size_t j = 0; j < header.size(); ++j)
    out << (j ? "," : "") << header[j];
  out << '\n';
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < r.size(); ++j)
      out << (j ? "," : "") << r[j];
    out << '\n';
  }
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

double parse_double(const std::string& s, std::size_t row, const std::string& column) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last)
    throw BadValueError(row, column, "not a number: '" + s + "'");
  return v;
}

int parse_binary(const std::string& s, std::size_t row, const std::string& column) {
  if (s == "0") return 0;
  if (s == "1") return 1;
  throw BadValueError(row, column, "expected 0 or 1, got '" + s + "'");
}

}  // namespace causalcmp
