#pragma once

#include <algorithm>
#include <cstddef>

#include "mar/classic/li.hpp"
#include "mar/core/error.hpp"
#include "mar/ct/geometry.hpp"
#include "mar/ct/hu.hpp"
#include "mar/ct/image.hpp"
#include "mar/ct/projector.hpp"
#include "mar/mask/mask.hpp"

namespace mar::classic {

struct SegmentationThresholds {
    double air_soft = -500.0;   // HU
    double soft_bone = 300.0;   // HU
    double metal = 2500.0;      // HU

    void validate() const {
        if (!(air_soft < soft_bone && soft_bone < metal))
            throw ConfigError("segmentation thresholds must be strictly increasing");
    }
};

/// Piecewise-constant prior (HU): air -> -1000, soft tissue and metal -> 0, bone kept.
inline ct::Image segment_prior(const ct::Image& hu, const SegmentationThresholds& th = {}) {
    th.validate();
    ct::Image out = hu;
    for (auto& v : out.values) {
        if (v < th.air_soft)
            v = -1000.0;
        else if (v < th.soft_bone || v >= th.metal)
            v = 0.0;
    }
    return out;
}

/**
 * Normalized interpolation against a given prior sinogram: divide by the
 * prior (guarded at 1e-6 of its maximum), interpolate linearly inside the
 * trace, multiply back. Untraced values are copied from the input.
 * `flagged` is set when the guard is active on more than half the trace.
 */
inline Completion nmar_complete_with_prior(const ct::Sinogram& sino, const Mask& trace, const ct::Sinogram& prior_sino) {
    require_trace_matches(sino, trace, "nmar_complete");
    if (prior_sino.n_views != sino.n_views || prior_sino.n_detectors != sino.n_detectors)
        throw UsageError("nmar_complete: prior sinogram shape does not match");
    const double peak = *std::max_element(prior_sino.values.begin(), prior_sino.values.end());
    const double eps = 1e-6 * std::max(peak, 0.0);
    ct::Sinogram denom = prior_sino;
    std::size_t guarded = 0;
    for (std::size_t i = 0; i < denom.values.size(); ++i) {
        if (denom.values[i] <= eps) {
            if (trace.values[i]) ++guarded;
            denom.values[i] = eps > 0.0 ? eps : 1.0;
        }
    }
    ct::Sinogram normalized = sino;
    for (std::size_t i = 0; i < normalized.values.size(); ++i) normalized.values[i] /= denom.values[i];
    auto li = li_complete(normalized, trace);
    Completion out{sino, li.flagged};
    for (std::size_t i = 0; i < sino.values.size(); ++i)
        if (trace.values[i]) out.sinogram.values[i] = li.sinogram.values[i] * denom.values[i];
    const std::size_t traced = trace.count();
    if (traced > 0 && 2 * guarded > traced) out.flagged = true;
    return out;
}

/// NMAR: prior from a segmented uncorrected reconstruction (HU), forward-projected.
inline Completion nmar_complete(const ct::Sinogram& sino, const Mask& trace, const ct::Image& uncorrected_hu,
                                const SegmentationThresholds& th, const ct::ScanGeometry& geom) {
    require_trace_matches(sino, trace, "nmar_complete");
    if (geom.n_views != sino.n_views || geom.n_detectors != sino.n_detectors)
        throw UsageError("nmar_complete: geometry does not match sinogram");
    const auto prior = segment_prior(uncorrected_hu, th);
    const auto prior_sino = ct::radon(ct::hu_to_mu(prior), geom);
    return nmar_complete_with_prior(sino, trace, prior_sino);
}

}  // namespace mar::classic
