#include "diffsmooth/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "diffsmooth/error.hpp"

namespace diffsmooth {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 400.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 150.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;

const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string num(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
    if (hi - lo < 1e-300) {
      lo -= 0.5;
      hi += 0.5;
    }
  }
};

void frame(std::ostringstream& os, const std::string& title, const Range& xr, const Range& yr,
           const std::string& xlabel, const std::string& ylabel) {
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  os << "<rect x='" << kLeft << "' y='" << kTop << "' width='" << pw << "' height='" << ph
     << "' fill='none' stroke='#333'/>\n";
  os << "<text x='" << kLeft + pw / 2 << "' y='24' text-anchor='middle' font-size='15'>"
     << escape(title) << "</text>\n";
  os << "<text x='" << kLeft + pw / 2 << "' y='" << kHeight - 10
     << "' text-anchor='middle' font-size='12'>" << escape(xlabel) << "</text>\n";
  os << "<text x='16' y='" << kTop + ph / 2 << "' text-anchor='middle' font-size='12' transform='rotate(-90 16 "
     << kTop + ph / 2 << ")'>" << escape(ylabel) << "</text>\n";
  for (int k = 0; k <= 4; ++k) {
    const double fx = k / 4.0;
    const double x = kLeft + fx * pw;
    const double y = kTop + ph - fx * ph;
    os << "<text x='" << x << "' y='" << kTop + ph + 16 << "' text-anchor='middle' font-size='10'>"
       << num(xr.lo + fx * (xr.hi - xr.lo)) << "</text>\n";
    os << "<text x='" << kLeft - 6 << "' y='" << y + 3 << "' text-anchor='end' font-size='10'>"
       << num(yr.lo + fx * (yr.hi - yr.lo)) << "</text>\n";
  }
}

std::string header() {
  std::ostringstream os;
  os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kWidth << "' height='" << kHeight
     << "' font-family='sans-serif'>\n<rect width='100%' height='100%' fill='white'/>\n";
  return os.str();
}

}  // namespace

std::string line_plot(const std::string& title, const std::string& xlabel,
                      const std::string& ylabel, const std::vector<Series>& series) {
  Range xr, yr;
  for (const auto& s : series) {
    for (double v : s.x) xr.add(v);
    for (double v : s.y) yr.add(v);
  }
  xr.finish();
  yr.finish();
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  std::ostringstream os;
  os << header();
  frame(os, title, xr, yr, xlabel, ylabel);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kColors[k % 6];
    os << "<polyline fill='none' stroke='" << color << "' stroke-width='1.6'"
       << (s.dashed ? " stroke-dasharray='6 4'" : "") << " points='";
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      const double px = kLeft + (s.x[i] - xr.lo) / (xr.hi - xr.lo) * pw;
      const double py = kTop + ph - (s.y[i] - yr.lo) / (yr.hi - yr.lo) * ph;
      os << num(px) << ',' << num(py) << ' ';
    }
    os << "'/>\n";
    const double ly = kTop + 14.0 + 18.0 * static_cast<double>(k);
    os << "<line x1='" << kWidth - kRight + 10 << "' y1='" << ly << "' x2='" << kWidth - kRight + 34
       << "' y2='" << ly << "' stroke='" << color << "' stroke-width='2'"
       << (s.dashed ? " stroke-dasharray='6 4'" : "") << "/>\n";
    os << "<text x='" << kWidth - kRight + 40 << "' y='" << ly + 4 << "' font-size='11'>"
       << escape(s.label) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string heat_plot(const std::string& title, const std::vector<double>& xs,
                      const std::vector<double>& ys, const std::vector<std::vector<double>>& values) {
  Range xr, yr, vr;
  for (double v : xs) xr.add(v);
  for (double v : ys) yr.add(v);
  for (const auto& row : values) {
    for (double v : row) vr.add(v);
  }
  xr.finish();
  yr.finish();
  vr.finish();
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  std::ostringstream os;
  os << header();
  const std::size_t ny = ys.size();
  const std::size_t ystride = std::max<std::size_t>(1, ny / 200);
  const double cw = pw / static_cast<double>(std::max<std::size_t>(1, xs.size()));
  const double ch = ph / static_cast<double>(std::max<std::size_t>(1, (ny + ystride - 1) / ystride));
  for (std::size_t i = 0; i < xs.size() && i < values.size(); ++i) {
    for (std::size_t j = 0, cell = 0; j < ny && j < values[i].size(); j += ystride, ++cell) {
      const double f = (values[i][j] - vr.lo) / (vr.hi - vr.lo);
      const int shade = static_cast<int>(std::lround(255.0 * (1.0 - std::clamp(f, 0.0, 1.0))));
      os << "<rect x='" << num(kLeft + cw * static_cast<double>(i)) << "' y='"
         << num(kTop + ph - ch * static_cast<double>(cell + 1)) << "' width='" << num(cw + 0.5)
         << "' height='" << num(ch + 0.5) << "' fill='rgb(" << shade << ',' << shade << ",255)'/>\n";
    }
  }
  frame(os, title, xr, yr, "t", "x");
  os << "</svg>\n";
  return os.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path);
  out << text;
}

}  // namespace diffsmooth
