#ifndef CARLEMAN_CSV_HPP
#define CARLEMAN_CSV_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace carleman {

/// 17 significant digits, locale independent ("inf", "-inf", "nan" for non-finite).
std::string format_double(double v);

/// Minimal CSV table: one header row, string cells.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> row);
  void write(std::ostream& out) const;
  void write_file(const std::string& path) const;
};

/// Parses comma-separated rows (no quoting); the first row is the header.
CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);

}  // namespace carleman

#endif
