#include "ismo/plot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ismo {

namespace {

const std::array<std::uint8_t, 3> kPalette[] = {
    {230, 80, 60}, {60, 120, 230}, {60, 180, 90}, {220, 170, 40}, {160, 80, 200}, {70, 70, 70},
};

void put_px(ImageU8& img, int x, int y, std::array<std::uint8_t, 3> c) {
    if (!img.in_bounds(x, y)) return;
    auto* p = img.px(x, y);
    p[0] = c[0];
    p[1] = c[1];
    p[2] = c[2];
}

void draw_line(ImageU8& img, int x0, int y0, int x1, int y1, std::array<std::uint8_t, 3> c) {
    const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    while (true) {
        put_px(img, x0, y0, c);
        if (x0 == x1 && y0 == y1) break;
        const int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y0 += sy;
        }
    }
}

ImageU8 white_canvas(int w, int h) {
    ImageU8 img(w, h);
    std::fill(img.rgb.begin(), img.rgb.end(), std::uint8_t{255});
    return img;
}

}  // namespace

void plot_lines(const std::string& path, const std::vector<std::vector<double>>& series,
                int width, int height) {
    if (series.empty()) throw std::invalid_argument("plot_lines: no series");
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    std::size_t maxlen = 0;
    for (const auto& s : series)
        for (double v : s) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    for (const auto& s : series) maxlen = std::max(maxlen, s.size());
    if (maxlen == 0) throw std::invalid_argument("plot_lines: empty series");
    if (hi == lo) hi = lo + 1.0;

    ImageU8 img = white_canvas(width, height);
    const int m = 30;  // margin
    draw_line(img, m, height - m, width - m, height - m, {0, 0, 0});
    draw_line(img, m, m, m, height - m, {0, 0, 0});
    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const auto c = kPalette[si % std::size(kPalette)];
        int px = 0, py = 0;
        for (std::size_t i = 0; i < s.size(); ++i) {
            const double fx = maxlen > 1 ? static_cast<double>(i) / (maxlen - 1) : 0.0;
            const double fy = (s[i] - lo) / (hi - lo);
            const int x = m + static_cast<int>(fx * (width - 2 * m));
            const int y = height - m - static_cast<int>(fy * (height - 2 * m));
            if (i) draw_line(img, px, py, x, y, c);
            px = x;
            py = y;
        }
    }
    write_png(path, img);
}

void plot_heatmap(const std::string& path, const std::vector<std::vector<double>>& grid,
                  int cell_px) {
    if (grid.empty() || grid[0].empty()) throw std::invalid_argument("plot_heatmap: empty grid");
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& row : grid)
        for (double v : row) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    if (hi == lo) hi = lo + 1.0;
    const int rows = static_cast<int>(grid.size()), cols = static_cast<int>(grid[0].size());
    ImageU8 img(cols * cell_px, rows * cell_px);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            const double f = (grid[r][c] - lo) / (hi - lo);
            // cold blue -> warm red ramp
            const auto col = std::array<std::uint8_t, 3>{
                static_cast<std::uint8_t>(40 + 200 * f),
                static_cast<std::uint8_t>(60 + 60 * (1 - std::abs(2 * f - 1))),
                static_cast<std::uint8_t>(40 + 200 * (1 - f))};
            for (int y = r * cell_px; y < (r + 1) * cell_px; ++y)
                for (int x = c * cell_px; x < (c + 1) * cell_px; ++x) put_px(img, x, y, col);
        }
    write_png(path, img);
}

void plot_histogram(const std::string& path, const std::vector<double>& values, int bins,
                    int width, int height) {
    if (values.empty() || bins < 1) throw std::invalid_argument("plot_histogram: empty input");
    double lo = *std::min_element(values.begin(), values.end());
    double hi = *std::max_element(values.begin(), values.end());
    if (hi == lo) hi = lo + 1.0;
    std::vector<int> counts(bins, 0);
    for (double v : values) {
        int b = static_cast<int>((v - lo) / (hi - lo) * bins);
        counts[std::clamp(b, 0, bins - 1)]++;
    }
    const int peak = *std::max_element(counts.begin(), counts.end());
    ImageU8 img = white_canvas(width, height);
    const int m = 30;
    draw_line(img, m, height - m, width - m, height - m, {0, 0, 0});
    const double bw = static_cast<double>(width - 2 * m) / bins;
    for (int b = 0; b < bins; ++b) {
        const int h = static_cast<int>(static_cast<double>(counts[b]) / peak * (height - 2 * m));
        const int x0 = m + static_cast<int>(b * bw), x1 = m + static_cast<int>((b + 1) * bw) - 1;
        for (int x = x0; x <= x1; ++x)
            for (int y = height - m - h; y < height - m; ++y) put_px(img, x, y, {60, 120, 230});
    }
    write_png(path, img);
}

}  // namespace ismo
