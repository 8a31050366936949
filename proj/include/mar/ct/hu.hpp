#pragma once

#include "mar/core/error.hpp"
#include "mar/ct/image.hpp"

namespace mar::ct {

/// Water attenuation used throughout (mm^-1), roughly 70 keV effective.
inline constexpr double kMuWater = 0.02;

inline Image mu_to_hu(const Image& image, double mu_water = kMuWater) {
    if (!(mu_water > 0.0)) throw UsageError("mu_to_hu: mu_water must be positive");
    Image out = image;
    for (auto& v : out.values) v = 1000.0 * (v - mu_water) / mu_water;
    return out;
}

inline Image hu_to_mu(const Image& image, double mu_water = kMuWater) {
    if (!(mu_water > 0.0)) throw UsageError("hu_to_mu: mu_water must be positive");
    Image out = image;
    for (auto& v : out.values) v = mu_water * (1.0 + v / 1000.0);
    return out;
}

}  // namespace mar::ct
