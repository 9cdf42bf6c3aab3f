#pragma once

#include <string>
#include <utility>
#include <vector>

namespace infuse::svg {

struct Series {
    std::string name;
    std::vector<std::pair<double, double>> points;
};

// Minimal standalone SVG charts for reports; axes span the data range.
std::string line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                       const std::vector<Series>& series);
// Points only, one colour per series.
std::string scatter_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                          const std::vector<Series>& series);
std::string bar_chart(const std::string& title, const std::vector<std::pair<std::string, double>>& bars,
                      double y_max = 1.0);

} // namespace infuse::svg
