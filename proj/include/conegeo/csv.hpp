#pragma once

// Minimal CSV helpers: '.' decimal separator, ',' delimiter, header row.

#include <iosfwd>
#include <string>
#include <vector>

namespace conegeo::csv {

/// Shortest-round-trip style formatting (%.17g), locale independent.
std::string number(double v);

std::vector<std::string> split(const std::string& line, char delim = ',');

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a header column, or -1.
  int column(const std::string& name) const;
};

Table read(std::istream& in);
Table read_file(const std::string& path);

double to_double(const std::string& s);

}  // namespace conegeo::csv
