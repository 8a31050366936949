#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>

#include "mar/core/error.hpp"
#include "mar/ct/image.hpp"

namespace mar::ct {

enum class Beam { parallel, fan };

/**
 * 2-D scan geometry. Views are uniformly spaced over `angular_range`
 * starting at 0. Detector bins are centred on the rotation axis; for fan
 * beam the detector is a virtual flat line through the isocentre, so
 * `detector_spacing` is measured at the isocentre.
 */
struct ScanGeometry {
    std::size_t n_views = 180;
    double angular_range = 2.0 * std::numbers::pi;
    std::size_t n_detectors = 128;
    double detector_spacing = 1.0;   // mm
    double source_to_center = 595.0; // mm, fan beam only
    Beam beam = Beam::parallel;

    void validate() const {
        if (n_views < 1) throw ConfigError("geometry: n_views must be >= 1");
        if (n_detectors < 1) throw ConfigError("geometry: n_detectors must be >= 1");
        if (!(detector_spacing > 0.0)) throw ConfigError("geometry: detector_spacing must be > 0");
        if (!(angular_range > 0.0)) throw ConfigError("geometry: angular_range must be > 0");
    }

    void validate(const Image& image) const {
        validate();
        if (beam == Beam::fan && !(source_to_center > image.half_diagonal()))
            throw ConfigError("geometry: source must lie outside the image (source_to_center " +
                              std::to_string(source_to_center) + " mm <= half diagonal " +
                              std::to_string(image.half_diagonal()) + " mm)");
    }

    double view_angle(std::size_t v) const {
        return angular_range * static_cast<double>(v) / static_cast<double>(n_views);
    }

    double detector_u(std::size_t d) const {
        return (static_cast<double>(d) - 0.5 * (static_cast<double>(n_detectors) - 1.0)) * detector_spacing;
    }

    /// Fractional detector index of a coordinate u (mm).
    double detector_index(double u) const {
        return u / detector_spacing + 0.5 * (static_cast<double>(n_detectors) - 1.0);
    }
};

struct Ray {
    double ox, oy;  // origin
    double dx, dy;  // unit direction
    bool half_line; // integrate only t >= 0
};

inline Ray ray_of(const ScanGeometry& g, std::size_t view, std::size_t det) {
    const double angle = g.view_angle(view);
    const double c = std::cos(angle), s = std::sin(angle);
    const double u = g.detector_u(det);
    if (g.beam == Beam::parallel) return Ray{u * c, u * s, -s, c, false};
    // Source at R*(c, s); detector point u*(-s, c).
    const double sx = g.source_to_center * c, sy = g.source_to_center * s;
    double dx = -u * s - sx, dy = u * c - sy;
    const double len = std::hypot(dx, dy);
    return Ray{sx, sy, dx / len, dy / len, true};
}

}  // namespace mar::ct
