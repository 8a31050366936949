#pragma once

#include <cmath>
#include <cstddef>

#include "mar/ct/geometry.hpp"
#include "mar/ct/image.hpp"

namespace mar::ct {

/**
 * Joseph line integral: steps one pixel row (or column, whichever axis the
 * ray is closer to) at a time and linearly interpolates between the two
 * nearest pixels along the other axis. Pixels outside the grid read as 0.
 */
inline double joseph_line_integral(const Image& img, const Ray& ray) {
    const double ps = img.pixel_size;
    const double cx = 0.5 * (static_cast<double>(img.width) - 1.0);
    const double cy = 0.5 * (static_cast<double>(img.height) - 1.0);
    const long w = static_cast<long>(img.width), h = static_cast<long>(img.height);
    double total = 0.0;
    if (std::abs(ray.dy) >= std::abs(ray.dx)) {
        for (long r = 0; r < h; ++r) {
            const double y = (static_cast<double>(r) - cy) * ps;
            const double t = (y - ray.oy) / ray.dy;
            if (ray.half_line && t < 0.0) continue;
            const double fc = (ray.ox + t * ray.dx) / ps + cx;
            const double fl = std::floor(fc);
            const long c0 = static_cast<long>(fl);
            if (c0 < -1 || c0 >= w) continue;
            const double frac = fc - fl;
            const double* row = img.values.data() + r * w;
            if (c0 >= 0) total += (1.0 - frac) * row[c0];
            if (c0 + 1 < w) total += frac * row[c0 + 1];
        }
        return total * ps / std::abs(ray.dy);
    }
    for (long c = 0; c < w; ++c) {
        const double x = (static_cast<double>(c) - cx) * ps;
        const double t = (x - ray.ox) / ray.dx;
        if (ray.half_line && t < 0.0) continue;
        const double fr = (ray.oy + t * ray.dy) / ps + cy;
        const double fl = std::floor(fr);
        const long r0 = static_cast<long>(fl);
        if (r0 < -1 || r0 >= h) continue;
        const double frac = fr - fl;
        if (r0 >= 0) total += (1.0 - frac) * img.values[r0 * w + c];
        if (r0 + 1 < h) total += frac * img.values[(r0 + 1) * w + c];
    }
    return total * ps / std::abs(ray.dx);
}

/// Forward projection (line integrals in mu * mm).
inline Sinogram radon(const Image& image, const ScanGeometry& geom) {
    geom.validate(image);
    Sinogram out(geom.n_views, geom.n_detectors);
    for (std::size_t v = 0; v < geom.n_views; ++v)
        for (std::size_t d = 0; d < geom.n_detectors; ++d)
            out.at(v, d) = joseph_line_integral(image, ray_of(geom, v, d));
    return out;
}

}  // namespace mar::ct
