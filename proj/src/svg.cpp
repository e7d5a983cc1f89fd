#include "swinforge/svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "swinforge/common.hpp"

namespace swinforge {

namespace {

constexpr double kWidth = 640, kHeight = 440;
constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 50;

struct Range {
    double lo = 0, hi = 1;
    double map(double v, double a, double b) const {
        if (hi == lo) return (a + b) / 2;
        return a + (v - lo) / (hi - lo) * (b - a);
    }
};

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

void axes(std::ostream& os, const std::string& title, const std::string& x_label,
          const std::string& y_label, const Range& xr, const Range& yr) {
    os << "<rect x='" << kLeft << "' y='" << kTop << "' width='" << kWidth - kLeft - kRight
       << "' height='" << kHeight - kTop - kBottom
       << "' fill='white' stroke='#444' stroke-width='1'/>\n";
    os << "<text x='" << kWidth / 2 << "' y='22' text-anchor='middle' font-size='15'>" << title
       << "</text>\n";
    os << "<text x='" << kWidth / 2 << "' y='" << kHeight - 12
       << "' text-anchor='middle' font-size='12'>" << x_label << "</text>\n";
    os << "<text x='16' y='" << kHeight / 2 << "' text-anchor='middle' font-size='12' "
       << "transform='rotate(-90 16 " << kHeight / 2 << ")'>" << y_label << "</text>\n";
    for (int i = 0; i <= 4; ++i) {
        double t = i / 4.0;
        double xv = xr.lo + t * (xr.hi - xr.lo);
        double yv = yr.lo + t * (yr.hi - yr.lo);
        double px = xr.map(xv, kLeft, kWidth - kRight);
        double py = yr.map(yv, kHeight - kBottom, kTop);
        os << "<text x='" << px << "' y='" << kHeight - kBottom + 16
           << "' text-anchor='middle' font-size='10'>" << fmt(xv) << "</text>\n";
        os << "<text x='" << kLeft - 6 << "' y='" << py + 3
           << "' text-anchor='end' font-size='10'>" << fmt(yv) << "</text>\n";
    }
}

}  // namespace

void write_line_chart_svg(const std::string& path, const std::string& title,
                          const std::string& x_label, const std::string& y_label,
                          const std::vector<PlotSeries>& series) {
    Range xr{1e300, -1e300}, yr{1e300, -1e300};
    for (const auto& s : series)
        for (auto [x, y] : s.points) {
            xr.lo = std::min(xr.lo, x);
            xr.hi = std::max(xr.hi, x);
            yr.lo = std::min(yr.lo, y);
            yr.hi = std::max(yr.hi, y);
        }
    if (xr.lo > xr.hi) xr = {0, 1};
    if (yr.lo > yr.hi) yr = {0, 1};
    if (yr.lo == yr.hi) { yr.lo -= 0.5; yr.hi += 0.5; }
    if (xr.lo == xr.hi) { xr.lo -= 0.5; xr.hi += 0.5; }

    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write SVG: " + path);
    f << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kWidth << "' height='" << kHeight
      << "' viewBox='0 0 " << kWidth << " " << kHeight << "'>\n";
    axes(f, title, x_label, y_label, xr, yr);
    double ly = kTop + 14;
    for (const auto& s : series) {
        f << "<polyline fill='none' stroke='" << s.color << "' stroke-width='1.8' points='";
        for (auto [x, y] : s.points)
            f << fmt(xr.map(x, kLeft, kWidth - kRight)) << ","
              << fmt(yr.map(y, kHeight - kBottom, kTop)) << " ";
        f << "'/>\n";
        f << "<rect x='" << kWidth - kRight - 150 << "' y='" << ly - 9
          << "' width='12' height='4' fill='" << s.color << "'/>\n";
        f << "<text x='" << kWidth - kRight - 132 << "' y='" << ly - 3
          << "' font-size='11'>" << s.name << "</text>\n";
        ly += 16;
    }
    f << "</svg>\n";
}

void write_scatter_svg(const std::string& path, const std::string& title,
                       const std::vector<ScatterPoint>& points) {
    Range xr{1e300, -1e300}, yr{1e300, -1e300};
    for (const auto& p : points) {
        xr.lo = std::min(xr.lo, p.x);
        xr.hi = std::max(xr.hi, p.x);
        yr.lo = std::min(yr.lo, p.y);
        yr.hi = std::max(yr.hi, p.y);
    }
    if (xr.lo > xr.hi) xr = {0, 1};
    if (yr.lo > yr.hi) yr = {0, 1};
    if (yr.lo == yr.hi) { yr.lo -= 0.5; yr.hi += 0.5; }
    if (xr.lo == xr.hi) { xr.lo -= 0.5; xr.hi += 0.5; }

    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write SVG: " + path);
    f << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kWidth << "' height='" << kHeight
      << "' viewBox='0 0 " << kWidth << " " << kHeight << "'>\n";
    axes(f, title, "dim 1", "dim 2", xr, yr);
    for (const auto& p : points) {
        const char* color = p.cls == 0 ? "#e6c300" : "#6a0dad";  // yellow CGI, purple ADI
        f << "<circle cx='" << fmt(xr.map(p.x, kLeft, kWidth - kRight)) << "' cy='"
          << fmt(yr.map(p.y, kHeight - kBottom, kTop)) << "' r='3' fill='" << color
          << "' fill-opacity='0.75'/>\n";
    }
    f << "<circle cx='" << kWidth - kRight - 150 << "' cy='" << kTop + 12
      << "' r='4' fill='#e6c300'/>\n"
      << "<text x='" << kWidth - kRight - 140 << "' y='" << kTop + 16
      << "' font-size='11'>CGI (Fake)</text>\n"
      << "<circle cx='" << kWidth - kRight - 150 << "' cy='" << kTop + 28
      << "' r='4' fill='#6a0dad'/>\n"
      << "<text x='" << kWidth - kRight - 140 << "' y='" << kTop + 32
      << "' font-size='11'>ADI (Real)</text>\n";
    f << "</svg>\n";
}

}  // namespace swinforge
