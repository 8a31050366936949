#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "mar/core/error.hpp"
#include "mar/io/png.hpp"
#include "mar/mask/mask.hpp"

namespace mar {

namespace detail {

// Samples an indicator at pixel centres of a size x size canvas; local
// coordinates are centred and rotated by `angle`.
inline Mask silhouette(std::size_t size, double angle, const std::function<bool(double, double)>& inside) {
    Mask m(size, size, MaskDomain::projection);
    const double c = std::cos(angle), s = std::sin(angle), half = 0.5 * (static_cast<double>(size) - 1.0);
    for (std::size_t r = 0; r < size; ++r)
        for (std::size_t col = 0; col < size; ++col) {
            const double x = static_cast<double>(col) - half, y = static_cast<double>(r) - half;
            if (inside(x * c + y * s, -x * s + y * c)) m.at(r, col) = 1;
        }
    return m;
}

}  // namespace detail

/**
 * Bundled implant silhouettes (balls, rods, screws, plates, wires, pins),
 * 32 x 32 each. Deterministic; 36 shapes.
 */
inline std::vector<Mask> builtin_metal_library() {
    constexpr std::size_t kSize = 32;
    constexpr double deg = std::numbers::pi / 180.0;
    std::vector<Mask> lib;
    for (double r : {2.5, 4.0, 5.5, 7.0, 9.0})
        lib.push_back(detail::silhouette(kSize, 0.0, [r](double x, double y) { return x * x + y * y <= r * r; }));
    for (auto [len, wid, ang] : std::vector<std::array<double, 3>>{
             {24, 3, 0}, {28, 4, 30}, {20, 5, 60}, {30, 3, 90}, {16, 6, 135}, {26, 2.5, 15}, {22, 4, 110}}) {
        lib.push_back(detail::silhouette(kSize, ang * deg, [len, wid](double x, double y) {
            return std::abs(x) <= 0.5 * len && std::abs(y) <= 0.5 * wid;
        }));
    }
    // Screws: shaft with sawtooth thread and a wider head.
    for (auto [len, wid, ang] : std::vector<std::array<double, 3>>{
             {22, 4, 0}, {26, 5, 45}, {18, 3, 90}, {28, 4, 20}, {24, 6, 160}, {20, 4, 75}, {26, 3, 120}}) {
        lib.push_back(detail::silhouette(kSize, ang * deg, [len, wid](double x, double y) {
            const double head = -0.5 * len;
            if (x >= head - 3.0 && x < head && std::abs(y) <= wid) return true;
            if (x < head || x > 0.5 * len) return false;
            const double tooth = std::fmod(x - head + 100.0, 3.0) / 3.0;
            const double tip = std::clamp((0.5 * len - x) / 4.0, 0.3, 1.0);
            return std::abs(y) <= (0.5 * wid + 1.2 * tooth) * tip;
        }));
    }
    // Plates with holes.
    for (auto [len, wid, ang, holes] : std::vector<std::array<double, 4>>{
             {28, 7, 0, 3}, {24, 8, 40, 2}, {30, 6, 95, 4}, {20, 9, 150, 2}, {26, 7, 65, 3}}) {
        lib.push_back(detail::silhouette(kSize, ang * deg, [len, wid, holes](double x, double y) {
            if (std::abs(x) > 0.5 * len || std::abs(y) > 0.5 * wid) return false;
            const double pitch = len / holes;
            for (int h = 0; h < static_cast<int>(holes); ++h) {
                const double hx = -0.5 * len + pitch * (h + 0.5);
                if ((x - hx) * (x - hx) + y * y <= 0.16 * wid * wid) return false;
            }
            return true;
        }));
    }
    // Wires: thin sinusoids.
    for (auto [amp, period, ang] : std::vector<std::array<double, 3>>{
             {3, 12, 0}, {5, 16, 30}, {2, 8, 80}, {6, 20, 125}, {4, 10, 170}, {3, 14, 55}}) {
        lib.push_back(detail::silhouette(kSize, ang * deg, [amp, period](double x, double y) {
            if (std::abs(x) > 14.0) return false;
            return std::abs(y - amp * std::sin(2.0 * std::numbers::pi * x / period)) <= 1.2;
        }));
    }
    // Pins: tapered rods with a ball end.
    for (auto [len, ang] : std::vector<std::array<double, 2>>{{26, 10}, {22, 70}, {28, 140}, {18, 100}, {24, 35}, {30, 0}}) {
        lib.push_back(detail::silhouette(kSize, ang * deg, [len](double x, double y) {
            const double x0 = -0.5 * len;
            if ((x - x0) * (x - x0) + y * y <= 9.0) return true;
            if (x < x0 || x > 0.5 * len) return false;
            return std::abs(y) <= 2.0 * (1.0 - (x - x0) / len) + 0.5;
        }));
    }
    return lib;
}

inline void save_metal_library(const std::filesystem::path& dir, const std::vector<Mask>& masks) {
    for (std::size_t i = 0; i < masks.size(); ++i) {
        io::GrayImage img{masks[i].width, masks[i].height, 1,
                          std::vector<std::uint16_t>(masks[i].values.begin(), masks[i].values.end())};
        char name[32];
        std::snprintf(name, sizeof name, "metal_%03zu.png", i);
        io::write_png(dir / name, img);
    }
}

/// Loads every *.png in `dir` in sorted filename order; nonzero pixels are metal.
inline std::vector<Mask> load_metal_library(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw ConfigError("metal library directory not found: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".png") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    std::vector<Mask> out;
    for (const auto& f : files) {
        auto img = io::read_png(f);
        Mask m(img.width, img.height, MaskDomain::projection);
        for (std::size_t i = 0; i < img.samples.size(); ++i) m.values[i] = img.samples[i] ? 1 : 0;
        out.push_back(std::move(m));
    }
    if (out.empty()) throw ConfigError("metal library directory has no PNG files: " + dir.string());
    return out;
}

}  // namespace mar
