#pragma once

#include <fstream>
#include <span>
#include <string>
#include <vector>

namespace diffsmooth {

/// Shortest decimal string that parses back to exactly `v`.
std::string format_double(double v);

/// CSV file with a mandatory header row, LF line endings.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header);

  void row(std::span<const double> values);
  void row(std::initializer_list<double> values) { row(std::span<const double>(values.begin(), values.size())); }

 private:
  std::ofstream out_;
  std::size_t columns_;
  std::string path_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  /// Index of a named column; throws Io when absent.
  std::size_t column(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);

}  // namespace diffsmooth
