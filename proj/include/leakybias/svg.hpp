#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace leakybias {

struct SvgSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct SvgChart {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  std::vector<SvgSeries> series;
};

// Minimal hand-emitted line chart: axes, ticks, legend, one polyline per
// series. Output is a pure function of the inputs, so regeneration from the
// same data is bit-identical.
std::string render_svg(const SvgChart& chart);

void write_svg(const SvgChart& chart, const std::filesystem::path& path);

}  // namespace leakybias
