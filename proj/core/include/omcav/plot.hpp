#ifndef OMCAV_PLOT_HPP
#define OMCAV_PLOT_HPP

// Data-first plot output: every figure is a CSV series plus a minimal
// static SVG rendering (axes, ticks, series, labels). Nothing interactive.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace omcav {

struct PlotSeries {
    enum class Kind { line, scatter };

    std::vector<double> x;
    std::vector<double> y;
    std::string x_label;  // includes the unit, e.g. "freq_hz"
    std::string y_label;
    Kind kind = Kind::line;
    std::string label;

    void validate() const;  // equal lengths, finite values only
};

// One series per CSV file: header `<x_label>,<y_label>`, then rows.
void write_series_csv(const std::filesystem::path& path, const PlotSeries& series);

// All series on shared axes.
void write_series_svg(const std::filesystem::path& path,
                      std::span<const PlotSeries> series, const std::string& title);

}  // namespace omcav

#endif  // OMCAV_PLOT_HPP
