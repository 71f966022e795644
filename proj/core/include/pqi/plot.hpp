#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace pqi {

struct LineSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

/// Minimal SVG line chart with axes, tick labels and one polyline per series.
[[nodiscard]] std::string render_line_chart_svg(const std::vector<LineSeries>& series, const std::string& title,
                                                const std::string& x_label, const std::string& y_label);
void write_line_chart_svg(const std::filesystem::path& path, const std::vector<LineSeries>& series,
                          const std::string& title, const std::string& x_label, const std::string& y_label);

}  // namespace pqi
