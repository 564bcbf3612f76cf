#pragma once

#include <string>
#include <vector>

namespace cosmo {

struct Series {
    std::string label;
    std::vector<double> x, y;
};

// Minimal PNG line-plot rasterizer (axes, ticks, legend, 5x7 font).
void plot_lines(const std::string& path, const std::string& title, const std::string& xlabel,
                const std::string& ylabel, const std::vector<Series>& series, int width = 720,
                int height = 480);

// Cell grid with a value colormap and per-cell numeric annotation.
void plot_heatmap(const std::string& path, const std::string& title,
                  const std::vector<std::string>& row_labels,
                  const std::vector<std::string>& col_labels,
                  const std::vector<std::vector<double>>& values);

}  // namespace cosmo
