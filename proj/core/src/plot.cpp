#include "omcav/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "omcav/errors.hpp"
#include "omcav/io.hpp"

namespace omcav {

void PlotSeries::validate() const {
    if (x.size() != y.size()) throw ValidationError("plot series: x and y lengths differ");
    if (x.empty()) throw ValidationError("plot series: empty");
    for (size_t i = 0; i < x.size(); ++i)
        if (!std::isfinite(x[i]) || !std::isfinite(y[i]))
            throw ValidationError("plot series: non-finite value");
}

void write_series_csv(const std::filesystem::path& path, const PlotSeries& series) {
    series.validate();
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    out << series.x_label << ',' << series.y_label << '\n';
    for (size_t i = 0; i < series.x.size(); ++i)
        out << format_double(series.x[i]) << ',' << format_double(series.y[i]) << '\n';
}

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

constexpr double kWidth = 720.0, kHeight = 480.0;
constexpr double kLeft = 80.0, kRight = 30.0, kTop = 40.0, kBottom = 60.0;

const char* series_color(size_t i) {
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
    return colors[i % 5];
}

}  // namespace

void write_series_svg(const std::filesystem::path& path,
                      std::span<const PlotSeries> series, const std::string& title) {
    if (series.empty()) throw ValidationError("svg: no series");
    for (const auto& s : series) s.validate();

    double xmin = series[0].x[0], xmax = xmin, ymin = series[0].y[0], ymax = ymin;
    for (const auto& s : series) {
        for (double v : s.x) {
            xmin = std::min(xmin, v);
            xmax = std::max(xmax, v);
        }
        for (double v : s.y) {
            ymin = std::min(ymin, v);
            ymax = std::max(ymax, v);
        }
    }
    if (xmax == xmin) xmax = xmin + 1.0;
    if (ymax == ymin) ymax = ymin + 1.0;
    const double ypad = 0.05 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;

    const double pw = kWidth - kLeft - kRight;
    const double ph = kHeight - kTop - kBottom;
    auto px = [&](double x) { return kLeft + (x - xmin) / (xmax - xmin) * pw; };
    auto py = [&](double y) { return kTop + (ymax - y) / (ymax - ymin) * ph; };

    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path.string());
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(kWidth)
        << "\" height=\"" << fmt(kHeight) << "\" viewBox=\"0 0 " << fmt(kWidth) << ' '
        << fmt(kHeight) << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << fmt(kWidth / 2) << "\" y=\"24\" text-anchor=\"middle\" "
           "font-family=\"sans-serif\" font-size=\"16\">" << title << "</text>\n";

    // Frame and ticks.
    out << "<rect x=\"" << fmt(kLeft) << "\" y=\"" << fmt(kTop) << "\" width=\"" << fmt(pw)
        << "\" height=\"" << fmt(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 4; ++t) {
        const double fx = xmin + (xmax - xmin) * t / 4.0;
        const double fy = ymin + (ymax - ymin) * t / 4.0;
        out << "<line x1=\"" << fmt(px(fx)) << "\" y1=\"" << fmt(kTop + ph) << "\" x2=\""
            << fmt(px(fx)) << "\" y2=\"" << fmt(kTop + ph + 5) << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << fmt(px(fx)) << "\" y=\"" << fmt(kTop + ph + 20)
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
            << fmt(fx) << "</text>\n";
        out << "<line x1=\"" << fmt(kLeft - 5) << "\" y1=\"" << fmt(py(fy)) << "\" x2=\""
            << fmt(kLeft) << "\" y2=\"" << fmt(py(fy)) << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << fmt(kLeft - 8) << "\" y=\"" << fmt(py(fy) + 4)
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
            << fmt(fy) << "</text>\n";
    }
    out << "<text x=\"" << fmt(kLeft + pw / 2) << "\" y=\"" << fmt(kHeight - 12)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
        << series[0].x_label << "</text>\n";
    out << "<text x=\"18\" y=\"" << fmt(kTop + ph / 2)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
           "transform=\"rotate(-90 18 " << fmt(kTop + ph / 2) << ")\">"
        << series[0].y_label << "</text>\n";

    for (size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const char* color = series_color(si);
        if (s.kind == PlotSeries::Kind::line) {
            out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
            for (size_t i = 0; i < s.x.size(); ++i)
                out << fmt(px(s.x[i])) << ',' << fmt(py(s.y[i])) << ' ';
            out << "\"/>\n";
        } else {
            for (size_t i = 0; i < s.x.size(); ++i)
                out << "<circle cx=\"" << fmt(px(s.x[i])) << "\" cy=\"" << fmt(py(s.y[i]))
                    << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        }
        if (!s.label.empty())
            out << "<text x=\"" << fmt(kLeft + pw - 8) << "\" y=\""
                << fmt(kTop + 16 + 16 * static_cast<double>(si))
                << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\" fill=\""
                << color << "\">" << s.label << "</text>\n";
    }
    out << "</svg>\n";
}

}  // namespace omcav
