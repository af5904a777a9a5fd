#pragma once

#include <string>
#include <vector>

namespace diffsmooth {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  bool dashed = false;
};

/// Standalone SVG line chart.
std::string line_plot(const std::string& title, const std::string& xlabel,
                      const std::string& ylabel, const std::vector<Series>& series);

/// Standalone SVG heat map of values[row][col] with rows along x (time) and
/// columns along y.
std::string heat_plot(const std::string& title, const std::vector<double>& xs,
                      const std::vector<double>& ys, const std::vector<std::vector<double>>& values);

void write_text(const std::string& path, const std::string& text);

}  // namespace diffsmooth
