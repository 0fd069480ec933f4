#pragma once

#include <string>
#include <vector>

#include "ismo/image.hpp"

namespace ismo {

// Minimal chart emitters for run artifacts; axes are linear, ranges auto.
void plot_lines(const std::string& path, const std::vector<std::vector<double>>& series,
                int width = 640, int height = 400);
void plot_heatmap(const std::string& path, const std::vector<std::vector<double>>& grid,
                  int cell_px = 48);
void plot_histogram(const std::string& path, const std::vector<double>& values, int bins = 32,
                    int width = 640, int height = 400);

}  // namespace ismo
