#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <vector>

#include "mar/core/error.hpp"
#include "mar/core/random.hpp"
#include "mar/ct/image.hpp"
#include "mar/ct/phantom.hpp"
#include "mar/ct/simulate.hpp"
#include "mar/ct/stack.hpp"
#include "mar/mask/library.hpp"
#include "mar/mask/placement.hpp"

namespace mar::eval {

struct VolumeGrid {
    std::size_t size = 64;    // in-plane pixels per side
    std::size_t slices = 64;
    double pixel_size = 2.0;  // mm
};

/**
 * Limb-like volume: a soft-tissue body with a fat layer and one or two bones
 * (cortex plus marrow). Sizes and bone positions drift smoothly along z.
 * Every parameter is drawn from a stream keyed by (seed, phantom id).
 */
inline std::vector<ct::PhantomSpec> limb_phantom(std::uint64_t seed, std::uint64_t id, const VolumeGrid& grid) {
    CounterRng rng(derive_seed(seed, 0x11b, id));
    const double fov = 0.5 * static_cast<double>(grid.size) * grid.pixel_size;  // half width, mm
    const double a0 = rng.uniform(0.60, 0.78) * fov, b0 = rng.uniform(0.48, 0.66) * fov;
    const double body_angle = rng.uniform(0.0, std::numbers::pi);
    const double body_mu = rng.uniform(0.0195, 0.0210);
    const double fat = rng.uniform(0.80, 0.90);
    const double freq = rng.uniform(0.5, 1.5), phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const int n_bones = rng.uniform() < 0.5 ? 1 : 2;
    struct Bone {
        double x, y, r, dx, dy, mu;
    };
    std::vector<Bone> bones;
    for (int k = 0; k < n_bones; ++k) {
        const double r = rng.uniform(0.10, 0.17) * fov;
        const double bx = rng.uniform(-0.35, 0.35) * a0, by = rng.uniform(-0.30, 0.30) * b0;
        bones.push_back({bx, by, r, rng.uniform(-0.08, 0.08) * fov, rng.uniform(-0.08, 0.08) * fov,
                         rng.uniform(0.018, 0.026)});
    }
    std::vector<ct::PhantomSpec> out;
    for (std::size_t z = 0; z < grid.slices; ++z) {
        const double t = static_cast<double>(z) / static_cast<double>(std::max<std::size_t>(grid.slices - 1, 1));
        const double swell = 1.0 + 0.10 * std::sin(2.0 * std::numbers::pi * freq * t + phase);
        ct::PhantomSpec spec;
        const double a = a0 * swell, b = b0 * swell;
        spec.ellipses.push_back({0.0, 0.0, a, b, body_angle, body_mu});
        // Fat between skin and muscle: slightly lower attenuation in an outer shell.
        spec.ellipses.push_back({0.0, 0.0, a * fat, b * fat, body_angle, 0.0015});
        for (const auto& bone : bones) {
            const double s = 1.0 + 0.15 * (t - 0.5);
            const double cx = bone.x + bone.dx * (t - 0.5), cy = bone.y + bone.dy * (t - 0.5);
            spec.ellipses.push_back({cx, cy, bone.r * s, bone.r * s * 0.9, 0.0, bone.mu});
            spec.ellipses.push_back({cx, cy, 0.55 * bone.r * s, 0.55 * bone.r * s * 0.9, 0.0, -0.8 * bone.mu});
        }
        out.push_back(std::move(spec));
    }
    return out;
}

inline std::vector<ct::Image> render_volume(const std::vector<ct::PhantomSpec>& specs, const VolumeGrid& grid) {
    std::vector<ct::Image> out;
    for (const auto& s : specs) out.push_back(ct::render_phantom(s, grid.size, grid.size, grid.pixel_size));
    return out;
}

/// Library silhouette reduced by an integer factor; a block is metal if any pixel is.
inline Mask downsample_mask(const Mask& m, std::size_t factor) {
    if (factor == 0) throw UsageError("downsample_mask: factor must be positive");
    const std::size_t w = (m.width + factor - 1) / factor, h = (m.height + factor - 1) / factor;
    Mask out(w, h, m.domain);
    for (std::size_t r = 0; r < m.height; ++r)
        for (std::size_t c = 0; c < m.width; ++c)
            if (m.at(r, c)) out.at(r / factor, c / factor) = 1;
    return out;
}

/// Metal implant: a placed library silhouette extruded over slices [z0, z1).
struct MetalObject {
    std::size_t shape = 0;  // library index
    std::size_t factor = 2;
    Placement at;
    std::size_t z0 = 0;
    std::size_t z1 = 0;

    std::size_t middle() const { return (z0 + z1) / 2; }
};

/// Random implant whose silhouette centre lies inside the body's inner region.
inline MetalObject random_metal(std::uint64_t seed, std::uint64_t id, const std::vector<Mask>& library,
                                const VolumeGrid& grid) {
    CounterRng rng(derive_seed(seed, 0x3e7a1, id));
    MetalObject m;
    m.shape = static_cast<std::size_t>(rng.uniform_int(0, static_cast<long long>(library.size()) - 1));
    m.factor = static_cast<std::size_t>(rng.uniform_int(2, 4));
    const auto small = downsample_mask(library[m.shape], m.factor);
    const double reach = 0.22 * static_cast<double>(grid.size);
    const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi), radius = reach * std::sqrt(rng.uniform());
    const double cr = 0.5 * static_cast<double>(grid.size) + radius * std::sin(angle);
    const double cc = 0.5 * static_cast<double>(grid.size) + radius * std::cos(angle);
    m.at.row = std::lround(cr - 0.5 * static_cast<double>(small.height));
    m.at.col = std::lround(cc - 0.5 * static_cast<double>(small.width));
    m.at.flip_rows = rng.uniform() < 0.5;
    m.at.flip_cols = rng.uniform() < 0.5;
    const auto extent = static_cast<std::size_t>(rng.uniform_int(4, static_cast<long long>(std::max<std::size_t>(grid.slices / 4, 4))));
    m.z0 = static_cast<std::size_t>(rng.uniform_int(2, static_cast<long long>(grid.slices - extent - 2)));
    m.z1 = m.z0 + extent;
    return m;
}

/// Image-domain metal mask of every slice.
inline std::vector<Mask> metal_masks(const MetalObject& m, const std::vector<Mask>& library, const VolumeGrid& grid) {
    if (m.shape >= library.size()) throw ConfigError("metal object refers to missing library shape " + std::to_string(m.shape));
    const auto placed = place_metal_mask(downsample_mask(library[m.shape], m.factor), grid.size, grid.size, m.at,
                                         MaskDomain::image);
    std::vector<Mask> out(grid.slices, Mask(grid.size, grid.size, MaskDomain::image));
    for (std::size_t z = m.z0; z < std::min(m.z1, grid.slices); ++z) out[z] = placed.mask;
    return out;
}

/// Trace masks per slice (empty where the slice has no metal).
inline std::vector<Mask> metal_traces(const std::vector<Mask>& masks, double pixel_size, const ct::ScanGeometry& geom) {
    std::vector<Mask> out;
    for (const auto& m : masks) out.push_back(ct::metal_trace(m, pixel_size, geom));
    return out;
}

/// Simulated scan of a volume. Slice z uses noise stream (seed, phantom id, z),
/// so scans with and without metal share their noise realization.
inline ct::SinogramStack simulate_volume(const std::vector<ct::Image>& slices, const std::vector<Mask>* metal,
                                         const ct::ScanGeometry& geom, const ct::PhysicsModel& physics, double photons,
                                         std::uint64_t seed, std::uint64_t phantom_id) {
    ct::SinogramStack out;
    for (std::size_t z = 0; z < slices.size(); ++z) {
        const Mask empty(slices[z].width, slices[z].height, MaskDomain::image);
        const Mask& m = metal ? metal->at(z) : empty;
        out.push_back(ct::simulate_metal_sinogram(slices[z], m, geom, physics, photons, derive_seed(seed, phantom_id, z)));
    }
    return out;
}

}  // namespace mar::eval
