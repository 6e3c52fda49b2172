#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace causalcmp {

/// Minimal CSV table: header row required, comma separated, UTF-8,
/// "." decimal separator. No embedded-comma quoting (none of our
/// schemas need it).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  bool has_column(const std::string& name) const;
  std::size_t column(const std::string& name) const;  // throws MissingColumnError
  const std::string& cell(std::size_t row, std::size_t col) const { return rows[row][col]; }
};

CsvTable read_csv(const std::string& path);

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

/// Fixed formatting so identical values always serialize identically.
std::string format_double(double v);

double parse_double(const std::string& s, std::size_t row, const std::string& column);
int parse_binary(const std::string& s, std::size_t row, const std::string& column);

}  // namespace causalcmp
