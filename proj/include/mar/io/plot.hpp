#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mar/core/error.hpp"
#include "mar/io/png.hpp"
#include "mar/tensor/marf.hpp"

namespace mar::io {

struct Series {
    std::string name;
    std::vector<double> y;  // one value per x position; NaN = no point
};

namespace detail {

struct Canvas {
    std::size_t w, h;
    std::vector<std::uint16_t> px;

    Canvas(std::size_t w_, std::size_t h_) : w(w_), h(h_), px(w_ * h_, 255) {}

    void set(long x, long y, std::uint16_t v) {
        if (x < 0 || y < 0 || x >= static_cast<long>(w) || y >= static_cast<long>(h)) return;
        px[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)] = v;
    }

    void line(long x0, long y0, long x1, long y1, std::uint16_t v, int dash = 0) {
        const long dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
        const long sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
        long err = dx + dy, step = 0;
        while (true) {
            if (dash == 0 || (step / dash) % 2 == 0) set(x0, y0, v);
            ++step;
            if (x0 == x1 && y0 == y1) break;
            const long e2 = 2 * err;
            if (e2 >= dy) { err += dy; x0 += sx; }
            if (e2 <= dx) { err += dx; y0 += sy; }
        }
    }

    void marker(long x, long y, int kind, std::uint16_t v) {
        for (long d = -3; d <= 3; ++d)
            for (long e = -3; e <= 3; ++e) {
                bool on = false;
                switch (kind % 5) {
                    case 0: on = std::max(std::abs(d), std::abs(e)) == 3; break;    // square
                    case 1: on = d == e || d == -e; break;                           // cross
                    case 2: on = std::abs(d * d + e * e - 9) <= 3; break;            // circle
                    case 3: on = std::abs(d) + std::abs(e) == 3; break;              // diamond
                    case 4: on = std::abs(d) <= 2 && std::abs(e) <= 2; break;        // filled
                }
                if (on) set(x + d, y + e, v);
            }
    }
};

}  // namespace detail

/**
 * Line plot of series over categorical x positions, rendered to a grayscale
 * PNG. Each series gets its own marker and dash pattern; the mapping and the
 * y range are written to `<path>.txt` since the raster carries no text.
 */
inline void write_line_plot(const std::filesystem::path& path, const std::vector<std::string>& x_labels,
                            const std::vector<Series>& series, const std::string& y_label) {
    if (x_labels.empty()) throw UsageError("write_line_plot: no x positions");
    double lo = INFINITY, hi = -INFINITY;
    for (const auto& s : series)
        for (double v : s.y)
            if (std::isfinite(v)) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
    if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
    if (hi - lo < 1e-12) hi = lo + 1.0;
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;

    const std::size_t W = 480, H = 320;
    const long left = 40, right = W - 20, top = 20, bottom = H - 40;
    detail::Canvas cv(W, H);
    cv.line(left, top, left, bottom, 0);
    cv.line(left, bottom, right, bottom, 0);
    const std::size_t n = x_labels.size();
    auto xpos = [&](std::size_t i) {
        return n == 1 ? (left + right) / 2 : left + 20 + static_cast<long>(i) * (right - left - 40) / static_cast<long>(n - 1);
    };
    auto ypos = [&](double v) { return bottom - static_cast<long>(std::lround((v - lo) / (hi - lo) * double(bottom - top))); };
    for (std::size_t i = 0; i < n; ++i) cv.line(xpos(i), bottom, xpos(i), bottom + 5, 0);
    for (int t = 0; t <= 4; ++t) {
        const long y = bottom - t * (bottom - top) / 4;
        cv.line(left - 5, y, left, y, 0);
        cv.line(left + 1, y, right, y, 220, 2);
    }
    std::string legend = "y: " + y_label + " from " + std::to_string(lo) + " to " + std::to_string(hi) + "\nx:";
    for (const auto& l : x_labels) legend += " " + l;
    legend += "\n";
    static const char* marker_names[] = {"square", "cross", "circle", "diamond", "filled square"};
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto shade = static_cast<std::uint16_t>(std::min<std::size_t>(40 * k, 160));
        const int dash = static_cast<int>(k % 3) * 3;
        long px = -1, py = -1;
        for (std::size_t i = 0; i < std::min(n, series[k].y.size()); ++i) {
            const double v = series[k].y[i];
            if (!std::isfinite(v)) {
                px = -1;
                continue;
            }
            const long x = xpos(i), y = ypos(v);
            if (px >= 0) cv.line(px, py, x, y, shade, dash);
            cv.marker(x, y, static_cast<int>(k), shade);
            px = x;
            py = y;
        }
        legend += series[k].name + ": " + marker_names[k % 5] + ", gray " + std::to_string(shade) + "\n";
    }
    write_png(path, GrayImage{W, H, 8, std::move(cv.px)});
    auto sidecar = path;
    sidecar += ".txt";
    marf::write_file_atomic(sidecar, legend);
}

/// Grid of equally sized images (rows x cols, row-major), each upscaled by
/// `zoom`, separated by 2-pixel gaps, windowed to 8 bits.
inline void write_panel_grid(const std::filesystem::path& path, const std::vector<std::vector<double>>& tiles,
                             std::size_t tile_w, std::size_t tile_h, std::size_t cols, Window win, std::size_t zoom = 2) {
    if (tiles.empty() || cols == 0) throw UsageError("write_panel_grid: nothing to draw");
    const std::size_t rows = (tiles.size() + cols - 1) / cols, gap = 2;
    const std::size_t tw = tile_w * zoom, th = tile_h * zoom;
    const std::size_t W = cols * tw + (cols - 1) * gap, H = rows * th + (rows - 1) * gap;
    const double background = win.level + 0.5 * win.width;
    std::vector<double> grid(W * H, background);
    for (std::size_t t = 0; t < tiles.size(); ++t) {
        if (tiles[t].size() != tile_w * tile_h) throw UsageError("write_panel_grid: tile size mismatch");
        const std::size_t r0 = (t / cols) * (th + gap), c0 = (t % cols) * (tw + gap);
        for (std::size_t r = 0; r < th; ++r)
            for (std::size_t c = 0; c < tw; ++c) grid[(r0 + r) * W + c0 + c] = tiles[t][(r / zoom) * tile_w + c / zoom];
    }
    write_windowed_png(path, W, H, grid, win, 8);
}

}  // namespace mar::io
