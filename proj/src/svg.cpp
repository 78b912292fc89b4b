#include "alrnn/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace alrnn {

namespace {

constexpr double kWidth = 640, kHeight = 480;
constexpr double kMarginLeft = 70, kMarginRight = 20;
constexpr double kMarginTop = 40, kMarginBottom = 50;

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();

    void include(double v) {
        if (std::isfinite(v)) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    void finalize() {
        if (lo > hi) { lo = 0.0; hi = 1.0; }
        if (hi - lo < 1e-300) { lo -= 0.5; hi += 0.5; }
    }
};

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

class Canvas {
public:
    Canvas(const std::string& path, const std::string& title,
           const std::string& x_label, const std::string& y_label,
           const Range& x, const Range& y)
        : out_(path, std::ios::binary), x_(x), y_(y) {
        if (!out_)
            throw std::runtime_error("cannot open '" + path + "' for writing");
        out_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
             << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << " "
             << kHeight << "\">\n";
        out_ << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
        out_ << "<text x=\"" << kWidth / 2 << "\" y=\"24\" font-size=\"16\" "
                "text-anchor=\"middle\" font-family=\"sans-serif\">"
             << title << "</text>\n";
        // axes
        const double x0 = kMarginLeft, x1 = kWidth - kMarginRight;
        const double y0 = kHeight - kMarginBottom, y1 = kMarginTop;
        out_ << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x1
             << "\" y2=\"" << y0 << "\" stroke=\"black\"/>\n";
        out_ << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0
             << "\" y2=\"" << y1 << "\" stroke=\"black\"/>\n";
        tick_labels(x_label, y_label);
    }

    double px(double v) const {
        return kMarginLeft + (v - x_.lo) / (x_.hi - x_.lo) *
                                 (kWidth - kMarginLeft - kMarginRight);
    }
    double py(double v) const {
        return kHeight - kMarginBottom -
               (v - y_.lo) / (y_.hi - y_.lo) *
                   (kHeight - kMarginTop - kMarginBottom);
    }

    void polyline(const std::vector<double>& x, const std::vector<double>& y,
                  const std::string& color) {
        out_ << "<polyline fill=\"none\" stroke=\"" << color
             << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < x.size(); ++i)
            out_ << fmt(px(x[i])) << "," << fmt(py(y[i])) << " ";
        out_ << "\"/>\n";
    }

    void dots(const std::vector<double>& x, const std::vector<double>& y,
              const std::string& color, double radius) {
        for (std::size_t i = 0; i < x.size(); ++i)
            out_ << "<circle cx=\"" << fmt(px(x[i])) << "\" cy=\""
                 << fmt(py(y[i])) << "\" r=\"" << radius << "\" fill=\"" << color
                 << "\"/>\n";
    }

    void segment(double ax, double ay, double bx, double by,
                 const std::string& color) {
        out_ << "<line x1=\"" << fmt(px(ax)) << "\" y1=\"" << fmt(py(ay))
             << "\" x2=\"" << fmt(px(bx)) << "\" y2=\"" << fmt(py(by))
             << "\" stroke=\"" << color << "\" stroke-width=\"1\"/>\n";
    }

    void legend(const std::vector<SvgSeries>& series) {
        double ly = kMarginTop + 14;
        for (const auto& s : series) {
            if (s.label.empty()) continue;
            out_ << "<rect x=\"" << kWidth - kMarginRight - 130 << "\" y=\""
                 << ly - 9 << "\" width=\"10\" height=\"10\" fill=\"" << s.color
                 << "\"/>\n";
            out_ << "<text x=\"" << kWidth - kMarginRight - 115 << "\" y=\"" << ly
                 << "\" font-size=\"12\" font-family=\"sans-serif\">" << s.label
                 << "</text>\n";
            ly += 16;
        }
    }

    ~Canvas() { out_ << "</svg>\n"; }

private:
    void tick_labels(const std::string& x_label, const std::string& y_label) {
        const double y0 = kHeight - kMarginBottom;
        out_ << "<text x=\"" << kMarginLeft << "\" y=\"" << y0 + 18
             << "\" font-size=\"12\" text-anchor=\"middle\" "
                "font-family=\"sans-serif\">"
             << fmt(x_.lo) << "</text>\n";
        out_ << "<text x=\"" << kWidth - kMarginRight << "\" y=\"" << y0 + 18
             << "\" font-size=\"12\" text-anchor=\"middle\" "
                "font-family=\"sans-serif\">"
             << fmt(x_.hi) << "</text>\n";
        out_ << "<text x=\"" << kMarginLeft - 6 << "\" y=\"" << y0 + 4
             << "\" font-size=\"12\" text-anchor=\"end\" "
                "font-family=\"sans-serif\">"
             << fmt(y_.lo) << "</text>\n";
        out_ << "<text x=\"" << kMarginLeft - 6 << "\" y=\"" << kMarginTop + 4
             << "\" font-size=\"12\" text-anchor=\"end\" "
                "font-family=\"sans-serif\">"
             << fmt(y_.hi) << "</text>\n";
        out_ << "<text x=\"" << (kMarginLeft + kWidth - kMarginRight) / 2
             << "\" y=\"" << kHeight - 12
             << "\" font-size=\"13\" text-anchor=\"middle\" "
                "font-family=\"sans-serif\">"
             << x_label << "</text>\n";
        out_ << "<text x=\"16\" y=\"" << (kMarginTop + kHeight - kMarginBottom) / 2
             << "\" font-size=\"13\" text-anchor=\"middle\" "
                "font-family=\"sans-serif\" transform=\"rotate(-90 16 "
             << (kMarginTop + kHeight - kMarginBottom) / 2 << ")\">" << y_label
             << "</text>\n";
    }

    std::ofstream out_;
    Range x_, y_;
};

} // namespace

void svg_plot(const std::string& path, const std::string& title,
              const std::string& x_label, const std::string& y_label,
              const std::vector<SvgSeries>& series) {
    Range x, y;
    for (const auto& s : series) {
        if (s.x.size() != s.y.size())
            throw std::invalid_argument("svg_plot: x/y size mismatch");
        for (double v : s.x) x.include(v);
        for (double v : s.y) y.include(v);
    }
    x.finalize();
    y.finalize();
    Canvas canvas(path, title, x_label, y_label, x, y);
    for (const auto& s : series) {
        if (s.points) canvas.dots(s.x, s.y, s.color, 2.5);
        else canvas.polyline(s.x, s.y, s.color);
    }
    canvas.legend(series);
}

void svg_segments(const std::string& path, const std::string& title,
                  const std::string& x_label, const std::string& y_label,
                  const std::vector<SvgSegment>& segments) {
    Range x, y;
    for (const auto& s : segments) {
        x.include(s.x0);
        x.include(s.x1);
        y.include(s.y0);
        y.include(s.y1);
    }
    x.finalize();
    y.finalize();
    Canvas canvas(path, title, x_label, y_label, x, y);
    for (const auto& s : segments) {
        canvas.segment(s.x0, s.y0, s.x1, s.y1, "#1f77b4");
        canvas.dots({s.x0}, {s.y0}, "#333333", 1.2);
    }
}

} // namespace alrnn
