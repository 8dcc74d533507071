#pragma once

#include <string>
#include <vector>

namespace grbm::svg {

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
    bool markers = false;
};

struct ChartOptions {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_x = false;
    bool log_y = false;
};

/// Self-contained SVG line chart on a fixed 800x600 viewBox. Points that
/// cannot be drawn on a log axis (<= 0) are skipped.
std::string line_chart(const std::vector<Series>& series, const ChartOptions& opts);

}  // namespace grbm::svg
