#include "leakybias/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace leakybias {

namespace {

constexpr int kWidth = 720;
constexpr int kHeight = 480;
constexpr int kMarginLeft = 70;
constexpr int kMarginRight = 160;  // legend column
constexpr int kMarginTop = 40;
constexpr int kMarginBottom = 50;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

struct AxisRange {
  double lo = 0.0, hi = 1.0;
  bool log = false;

  double map(double v, double pix_lo, double pix_hi) const {
    double a = log ? std::log10(v) : v;
    double l = log ? std::log10(lo) : lo;
    double h = log ? std::log10(hi) : hi;
    if (h == l) h = l + 1.0;
    return pix_lo + (a - l) / (h - l) * (pix_hi - pix_lo);
  }

  std::vector<double> ticks() const {
    std::vector<double> out;
    if (log) {
      const int e0 = static_cast<int>(std::floor(std::log10(lo)));
      const int e1 = static_cast<int>(std::ceil(std::log10(hi)));
      for (int e = e0; e <= e1; ++e) out.push_back(std::pow(10.0, e));
    } else {
      const double span = hi - lo;
      const double raw = span / 5.0;
      const double mag = std::pow(10.0, std::floor(std::log10(raw)));
      double step = mag;
      for (double m : {1.0, 2.0, 5.0, 10.0})
        if (raw <= m * mag) {
          step = m * mag;
          break;
        }
      const double first = std::ceil(lo / step) * step;
      for (double v = first; v <= hi + 0.5 * step; v += step) out.push_back(v);
    }
    return out;
  }
};

}  // namespace

std::string render_svg(const SvgChart& chart) {
  AxisRange xr{0.0, 1.0, chart.log_x}, yr{0.0, 1.0, chart.log_y};
  bool have = false;
  for (const auto& s : chart.series)
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      const double x = s.x[k], y = s.y[k];
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      if (chart.log_x && x <= 0.0) continue;
      if (chart.log_y && y <= 0.0) continue;
      if (!have) {
        xr.lo = xr.hi = x;
        yr.lo = yr.hi = y;
        have = true;
      }
      xr.lo = std::min(xr.lo, x);
      xr.hi = std::max(xr.hi, x);
      yr.lo = std::min(yr.lo, y);
      yr.hi = std::max(yr.hi, y);
    }
  if (!have) {
    xr = {chart.log_x ? 1.0 : 0.0, chart.log_x ? 10.0 : 1.0, chart.log_x};
    yr = {chart.log_y ? 1.0 : 0.0, chart.log_y ? 10.0 : 1.0, chart.log_y};
  }
  if (!chart.log_y && yr.lo == yr.hi) yr.hi = yr.lo + 1.0;
  if (!chart.log_x && xr.lo == xr.hi) xr.hi = xr.lo + 1.0;

  const double px0 = kMarginLeft, px1 = kWidth - kMarginRight;
  const double py0 = kHeight - kMarginBottom, py1 = kMarginTop;

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
     << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
  os << "<rect width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
  os << "<text x=\"" << (px0 + px1) / 2 << "\" y=\"22\" text-anchor=\"middle\" "
     << "font-family=\"monospace\" font-size=\"15\">" << chart.title << "</text>\n";

  // frame
  os << "<rect x=\"" << px0 << "\" y=\"" << py1 << "\" width=\"" << px1 - px0
     << "\" height=\"" << py0 - py1 << "\" fill=\"none\" stroke=\"black\"/>\n";

  for (double t : xr.ticks()) {
    if (t < xr.lo * (xr.log ? 0.999 : 1.0) - (xr.log ? 0.0 : 1e-12) || t > xr.hi * 1.001) continue;
    const double px = xr.map(t, px0, px1);
    os << "<line x1=\"" << px << "\" y1=\"" << py0 << "\" x2=\"" << px << "\" y2=\""
       << py0 + 5 << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << px << "\" y=\"" << py0 + 18
       << "\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"11\">" << fmt(t)
       << "</text>\n";
  }
  for (double t : yr.ticks()) {
    if (t < yr.lo * (yr.log ? 0.999 : 1.0) - (yr.log ? 0.0 : 1e-12) || t > yr.hi * 1.001) continue;
    const double py = yr.map(t, py0, py1);
    os << "<line x1=\"" << px0 - 5 << "\" y1=\"" << py << "\" x2=\"" << px0 << "\" y2=\""
       << py << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << px0 - 8 << "\" y=\"" << py + 4
       << "\" text-anchor=\"end\" font-family=\"monospace\" font-size=\"11\">" << fmt(t)
       << "</text>\n";
  }
  os << "<text x=\"" << (px0 + px1) / 2 << "\" y=\"" << kHeight - 12
     << "\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"12\">"
     << chart.x_label << "</text>\n";
  os << "<text x=\"18\" y=\"" << (py0 + py1) / 2
     << "\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"12\" "
     << "transform=\"rotate(-90 18 " << (py0 + py1) / 2 << ")\">" << chart.y_label
     << "</text>\n";

  for (std::size_t si = 0; si < chart.series.size(); ++si) {
    const auto& s = chart.series[si];
    const char* color = kPalette[si % (sizeof(kPalette) / sizeof(kPalette[0]))];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    bool first = true;
    for (std::size_t k = 0; k < s.x.size(); ++k) {
      const double x = s.x[k], y = s.y[k];
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      if (chart.log_x && x <= 0.0) continue;
      if (chart.log_y && y <= 0.0) continue;
      if (!first) os << ' ';
      os << fmt(xr.map(x, px0, px1)) << ',' << fmt(yr.map(y, py0, py1));
      first = false;
    }
    os << "\"/>\n";
    const double ly = kMarginTop + 16.0 * static_cast<double>(si) + 10.0;
    os << "<line x1=\"" << px1 + 10 << "\" y1=\"" << ly << "\" x2=\"" << px1 + 34
       << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"1.5\"/>\n";
    os << "<text x=\"" << px1 + 40 << "\" y=\"" << ly + 4
       << "\" font-family=\"monospace\" font-size=\"11\">" << s.label << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void write_svg(const SvgChart& chart, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_svg: cannot open " + path.string());
  out << render_svg(chart);
}

}  // namespace leakybias
