#pragma once

#include <optional>
#include <string>
#include <vector>

namespace fairdca::svg {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    bool dashed = false;
};

struct Marker {
    std::string label;
    double x = 0.0;
    double y = 0.0;
};

// Multi-series line chart with axes, ticks, legend, and an optional vertical
// reference line (e.g. the chosen threshold).
void write_line_chart(const std::string& path, const std::string& title,
                      const std::string& x_label, const std::string& y_label,
                      const std::vector<Series>& series,
                      std::optional<double> vline = std::nullopt);

// Grouped bar chart: one cluster per category, one bar per series.
void write_bar_chart(const std::string& path, const std::string& title,
                     const std::string& y_label,
                     const std::vector<std::string>& categories,
                     const std::vector<std::string>& series_labels,
                     const std::vector<std::vector<double>>& values,
                     double baseline = 0.0);

// Scatter plot with optional highlighted markers.
void write_scatter(const std::string& path, const std::string& title,
                   const std::string& x_label, const std::string& y_label,
                   const std::vector<Series>& series,
                   const std::vector<Marker>& markers = {});

}  // namespace fairdca::svg
