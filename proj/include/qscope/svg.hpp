#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace qscope {

/// Minimal static SVG line plots (polylines + axes + tick labels).
struct PlotSeries {
    std::vector<double> x, y;
    std::string color = "#1f77b4";
};

struct PlotSpec {
    std::string title, xlabel, ylabel;
    std::vector<PlotSeries> series;
    bool logx = false;
    bool logy = false;
    int width = 720, height = 440;
};

void write_svg_plot(const std::filesystem::path& path, const PlotSpec& spec);

}  // namespace qscope
