#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "mar/core/error.hpp"
#include "mar/core/random.hpp"
#include "mar/ct/geometry.hpp"
#include "mar/ct/image.hpp"
#include "mar/ct/projector.hpp"
#include "mar/mask/mask.hpp"

namespace mar::ct {

/// One energy bin of a coarse polychromatic spectrum.
struct EnergyBin {
    double fraction = 1.0;      // share of incident photons
    double tissue_scale = 1.0;  // multiplies the tissue image
    double metal_scale = 1.0;   // multiplies PhysicsModel::metal_mu
};

struct PhysicsModel {
    std::vector<EnergyBin> bins{{1.0, 1.0, 1.0}};
    double metal_mu = 0.25;  // mm^-1, iron at the effective energy

    /// Two-bin 120 kVp stand-in: the soft bin sees iron ~4x more strongly.
    static PhysicsModel two_bin_iron() { return PhysicsModel{{{0.5, 1.35, 4.0}, {0.5, 0.65, 1.0}}, 0.25}; }
};

inline constexpr double kNoiseless = std::numeric_limits<double>::infinity();

inline Image mask_to_image(const Mask& mask, double pixel_size) {
    Image img(mask.width, mask.height, pixel_size);
    for (std::size_t i = 0; i < mask.values.size(); ++i) img.values[i] = mask.values[i];
    return img;
}

/**
 * Metal-corrupted measurement. Metal pixels displace tissue; each bin's
 * transmission follows Beer-Lambert, bins are mixed by photon fraction,
 * detected counts are Poisson at `photons` per ray (infinite = noiseless),
 * zero counts are clamped to 1, and the result is log-normalized.
 *
 * Each ray draws from its own counter-based stream keyed by (seed, view,
 * detector), so results do not depend on evaluation order.
 */
inline Sinogram simulate_metal_sinogram(const Image& image, const Mask& metal_mask, const ScanGeometry& geom,
                                        const PhysicsModel& physics, double photons, std::uint64_t seed) {
    if (!(photons > 0.0)) throw UsageError("simulate_metal_sinogram: photons must be > 0");
    if (metal_mask.width != image.width || metal_mask.height != image.height)
        throw UsageError("simulate_metal_sinogram: metal mask does not match image");
    if (physics.bins.empty()) throw UsageError("simulate_metal_sinogram: no energy bins");
    geom.validate(image);

    double fsum = 0.0;
    for (const auto& b : physics.bins) fsum += b.fraction;
    if (!(fsum > 0.0)) throw UsageError("simulate_metal_sinogram: bin fractions sum to zero");

    Image tissue = image;
    for (std::size_t i = 0; i < tissue.values.size(); ++i)
        if (metal_mask.values[i]) tissue.values[i] = 0.0;
    const Sinogram tissue_path = radon(tissue, geom);
    const bool has_metal = !metal_mask.empty();
    const Sinogram metal_path = has_metal ? radon(mask_to_image(metal_mask, image.pixel_size), geom) : Sinogram();

    Sinogram out(geom.n_views, geom.n_detectors);
    for (std::size_t v = 0; v < geom.n_views; ++v) {
        for (std::size_t d = 0; d < geom.n_detectors; ++d) {
            const double pt = tissue_path.at(v, d);
            const double pm = has_metal ? metal_path.at(v, d) : 0.0;
            double transmission = 0.0;
            for (const auto& b : physics.bins)
                transmission += (b.fraction / fsum) * std::exp(-b.tissue_scale * pt - b.metal_scale * physics.metal_mu * pm);
            if (std::isinf(photons)) {
                out.at(v, d) = -std::log(std::max(transmission, std::numeric_limits<double>::min()));
                continue;
            }
            const double expected = photons * transmission;
            long long detected = 0;
            if (expected > 1e-12) {
                CounterRng rng(derive_seed(seed, v, d));
                detected = std::poisson_distribution<long long>(expected)(rng);
            }
            const double counts = static_cast<double>(std::max<long long>(detected, 1));
            out.at(v, d) = -std::log(counts / photons);
        }
    }
    return out;
}

/// Rays whose projection of the mask reaches 1e-6 of the maximum.
inline Mask metal_trace(const Mask& metal_mask, double pixel_size, const ScanGeometry& geom) {
    Mask trace(geom.n_detectors, geom.n_views, MaskDomain::trace);
    if (metal_mask.empty()) return trace;
    const Sinogram proj = radon(mask_to_image(metal_mask, pixel_size), geom);
    const double peak = *std::max_element(proj.values.begin(), proj.values.end());
    const double tau = 1e-6 * peak;
    for (std::size_t i = 0; i < proj.values.size(); ++i) trace.values[i] = proj.values[i] > 0.0 && proj.values[i] >= tau;
    return trace;
}

}  // namespace mar::ct
