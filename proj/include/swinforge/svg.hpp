#pragma once

// Minimal self-contained SVG emission for the three plot kinds the CLI
// produces: training curves, ROC curves and 2-D embedding scatters. Every
// plot has a CSV counterpart; tests compare the CSVs, the SVGs are for eyes.

#include <string>
#include <utility>
#include <vector>

namespace swinforge {

struct PlotSeries {
    std::string name;
    std::string color;  // css color
    std::vector<std::pair<double, double>> points;
};

void write_line_chart_svg(const std::string& path, const std::string& title,
                          const std::string& x_label, const std::string& y_label,
                          const std::vector<PlotSeries>& series);

struct ScatterPoint {
    double x = 0;
    double y = 0;
    int cls = 0;
};

// cls 0 is drawn yellow (CGI/Fake), cls 1 purple (ADI/Real).
void write_scatter_svg(const std::string& path, const std::string& title,
                       const std::vector<ScatterPoint>& points);

}  // namespace swinforge
