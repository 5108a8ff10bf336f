#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace warm::plot {

struct Series {
    std::string label;
    std::vector<double> x, y;
};

struct Chart {
    bool log_x = false;
    bool log_y = false;
    std::vector<Series> series;
};

/// Rasterizes a line chart to PNG. There is no text: axis ticks sit at decades on log axes and
/// at tenths of the range otherwise, and series take colours in order from a fixed palette. The
/// numbers live in the CSV written next to the plot.
void write_line_chart(const std::filesystem::path& path, const Chart& chart, int width = 640,
                      int height = 480);

}  // namespace warm::plot
