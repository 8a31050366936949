#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "mar/core/error.hpp"
#include "mar/core/random.hpp"
#include "mar/mask/mask.hpp"

namespace mar {

struct BlobParams {
    std::size_t min_blobs = 1;
    std::size_t max_blobs = 4;
    double min_radius = 0.04;  // fraction of min(width, height)
    double max_radius = 0.15;
    double irregularity = 0.35;  // relative radial jitter of polygon vertices
    std::size_t vertices = 12;
    std::size_t smoothing_passes = 2;

    void validate() const {
        if (min_blobs > max_blobs) throw ConfigError("blob params: min_blobs > max_blobs");
        if (!(min_radius > 0.0) || min_radius > max_radius) throw ConfigError("blob params: invalid radius range");
        if (irregularity < 0.0 || irregularity >= 1.0) throw ConfigError("blob params: irregularity must be in [0, 1)");
        if (vertices < 3) throw ConfigError("blob params: need at least 3 vertices");
    }
};

namespace detail {

inline bool inside_polygon(const std::vector<double>& xs, const std::vector<double>& ys, double x, double y) {
    bool in = false;
    for (std::size_t i = 0, j = xs.size() - 1; i < xs.size(); j = i++) {
        if ((ys[i] > y) != (ys[j] > y) && x < (xs[j] - xs[i]) * (y - ys[i]) / (ys[j] - ys[i]) + xs[i]) in = !in;
    }
    return in;
}

inline Mask dilate4(const Mask& m) {
    Mask out = m;
    for (std::size_t r = 0; r < m.height; ++r)
        for (std::size_t c = 0; c < m.width; ++c) {
            if (m.at(r, c)) continue;
            const bool hit = (r > 0 && m.at(r - 1, c)) || (r + 1 < m.height && m.at(r + 1, c)) ||
                             (c > 0 && m.at(r, c - 1)) || (c + 1 < m.width && m.at(r, c + 1));
            if (hit) out.at(r, c) = 1;
        }
    return out;
}

}  // namespace detail

/**
 * Union of randomly placed blobs. Each blob is a star-shaped polygon whose
 * vertex radii are jittered and then circularly smoothed; the rasterized
 * union is dilated by one pixel.
 */
inline Mask gen_blob_mask(std::size_t width, std::size_t height, const BlobParams& params, std::uint64_t seed,
                          MaskDomain domain = MaskDomain::projection) {
    params.validate();
    Mask m(width, height, domain);
    CounterRng rng(derive_seed(seed, 0xb10b));
    const auto n_blobs = static_cast<std::size_t>(
        rng.uniform_int(static_cast<long long>(params.min_blobs), static_cast<long long>(params.max_blobs)));
    if (n_blobs == 0) return m;
    const double scale = static_cast<double>(std::min(width, height));
    for (std::size_t b = 0; b < n_blobs; ++b) {
        const double radius = scale * rng.uniform(params.min_radius, params.max_radius);
        const double cx = rng.uniform(0.0, static_cast<double>(width));
        const double cy = rng.uniform(0.0, static_cast<double>(height));
        const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        std::vector<double> radii(params.vertices);
        for (auto& r : radii) r = radius * (1.0 + params.irregularity * rng.uniform(-1.0, 1.0));
        for (std::size_t pass = 0; pass < params.smoothing_passes; ++pass) {
            std::vector<double> next(radii.size());
            for (std::size_t i = 0; i < radii.size(); ++i)
                next[i] = 0.25 * radii[(i + radii.size() - 1) % radii.size()] + 0.5 * radii[i] +
                          0.25 * radii[(i + 1) % radii.size()];
            radii = std::move(next);
        }
        std::vector<double> xs(params.vertices), ys(params.vertices);
        for (std::size_t i = 0; i < params.vertices; ++i) {
            const double a = phase + 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(params.vertices);
            xs[i] = cx + radii[i] * std::cos(a);
            ys[i] = cy + radii[i] * std::sin(a);
        }
        const double reach = radius * (1.0 + params.irregularity) + 1.0;
        const auto r0 = static_cast<std::size_t>(std::max(0.0, std::floor(cy - reach)));
        const auto r1 = static_cast<std::size_t>(std::min(static_cast<double>(height), std::ceil(cy + reach)));
        const auto c0 = static_cast<std::size_t>(std::max(0.0, std::floor(cx - reach)));
        const auto c1 = static_cast<std::size_t>(std::min(static_cast<double>(width), std::ceil(cx + reach)));
        for (std::size_t r = r0; r < r1; ++r)
            for (std::size_t c = c0; c < c1; ++c)
                if (detail::inside_polygon(xs, ys, static_cast<double>(c) + 0.5, static_cast<double>(r) + 0.5)) m.at(r, c) = 1;
    }
    return detail::dilate4(m);
}

}  // namespace mar
