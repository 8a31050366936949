#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "mar/core/error.hpp"

namespace mar::ct {

/// 2-D attenuation map, row-major (row = y index). Values are linear
/// attenuation in mm^-1 unless a function says it works in HU.
struct Image {
    std::size_t width = 0;
    std::size_t height = 0;
    double pixel_size = 1.0;  // mm
    std::vector<double> values;

    Image() = default;
    Image(std::size_t w, std::size_t h, double ps, double fill = 0.0)
        : width(w), height(h), pixel_size(ps), values(w * h, fill) {}

    double& at(std::size_t row, std::size_t col) { return values[row * width + col]; }
    double at(std::size_t row, std::size_t col) const { return values[row * width + col]; }

    /// Physical coordinates (mm) of a pixel centre; the grid is centred on the origin.
    double x_of(std::size_t col) const { return (static_cast<double>(col) - 0.5 * (static_cast<double>(width) - 1.0)) * pixel_size; }
    double y_of(std::size_t row) const { return (static_cast<double>(row) - 0.5 * (static_cast<double>(height) - 1.0)) * pixel_size; }

    double half_diagonal() const {
        return 0.5 * pixel_size * std::hypot(static_cast<double>(width), static_cast<double>(height));
    }
};

/// Line integrals: rows are view angles, columns are detector bins.
struct Sinogram {
    std::size_t n_views = 0;
    std::size_t n_detectors = 0;
    std::vector<double> values;

    Sinogram() = default;
    Sinogram(std::size_t views, std::size_t dets, double fill = 0.0)
        : n_views(views), n_detectors(dets), values(views * dets, fill) {}

    double& at(std::size_t view, std::size_t det) { return values[view * n_detectors + det]; }
    double at(std::size_t view, std::size_t det) const { return values[view * n_detectors + det]; }
};

inline void require_same_grid(const Image& a, const Image& b, const char* op) {
    if (a.width != b.width || a.height != b.height)
        throw UsageError(std::string(op) + ": image sizes differ");
}

}  // namespace mar::ct
