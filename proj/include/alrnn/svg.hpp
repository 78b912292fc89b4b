#pragma once

// Minimal dependency-free SVG renderer for line/scatter plots and
// segment (flow) fields. Output is static markup; no display server
// involved.

#include <string>
#include <vector>

namespace alrnn {

struct SvgSeries {
    std::vector<double> x, y;
    std::string color = "#1f77b4";
    bool points = false; // scatter instead of polyline
    std::string label;
};

struct SvgSegment {
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

/// Line/scatter plot with auto-scaled axes and min/max tick labels.
void svg_plot(const std::string& path, const std::string& title,
              const std::string& x_label, const std::string& y_label,
              const std::vector<SvgSeries>& series);

/// Segment field (e.g. flow field): each segment is drawn with a dot at
/// its start point.
void svg_segments(const std::string& path, const std::string& title,
                  const std::string& x_label, const std::string& y_label,
                  const std::vector<SvgSegment>& segments);

} // namespace alrnn
