#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "mar/core/error.hpp"
#include "mar/ct/image.hpp"
#include "mar/mask/mask.hpp"

namespace mar::eval {

/// sqrt(mean((a-b)^2)) over all pixels.
inline double rmse(const ct::Image& a, const ct::Image& b) {
    ct::require_same_grid(a, b, "rmse");
    if (a.values.empty()) throw UsageError("rmse: empty images");
    double se = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) se += (a.values[i] - b.values[i]) * (a.values[i] - b.values[i]);
    return std::sqrt(se / static_cast<double>(a.values.size()));
}

/// RMSE over the pixels where `region` is 1.
inline double rmse(const ct::Image& a, const ct::Image& b, const Mask& region) {
    ct::require_same_grid(a, b, "rmse");
    if (region.width != a.width || region.height != a.height) throw UsageError("rmse: region does not match images");
    double se = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        if (!region.values[i]) continue;
        se += (a.values[i] - b.values[i]) * (a.values[i] - b.values[i]);
        ++n;
    }
    if (n == 0) throw UsageError("rmse: empty region");
    return std::sqrt(se / static_cast<double>(n));
}

inline Mask complement(const Mask& m) {
    Mask out = m;
    for (auto& v : out.values) v = v ? 0 : 1;
    return out;
}

/// The evaluation default: every pixel outside the metal.
inline double rmse_outside_metal(const ct::Image& a, const ct::Image& b, const Mask& metal) {
    return rmse(a, b, complement(metal));
}

/// RMSE of two sinograms over the traced bins.
inline double rmse(const ct::Sinogram& a, const ct::Sinogram& b, const Mask& trace) {
    if (a.n_views != b.n_views || a.n_detectors != b.n_detectors || trace.height != a.n_views || trace.width != a.n_detectors)
        throw UsageError("rmse: sinogram shapes differ");
    double se = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        if (!trace.values[i]) continue;
        se += (a.values[i] - b.values[i]) * (a.values[i] - b.values[i]);
        ++n;
    }
    if (n == 0) throw UsageError("rmse: empty region");
    return std::sqrt(se / static_cast<double>(n));
}

inline ct::Image reinsert_metal(const ct::Image& img, const Mask& metal, double value) {
    if (metal.width != img.width || metal.height != img.height) throw UsageError("reinsert_metal: size mismatch");
    ct::Image out = img;
    for (std::size_t i = 0; i < out.values.size(); ++i)
        if (metal.values[i]) out.values[i] = value;
    return out;
}

struct SsimParams {
    std::size_t window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 2000.0;  // HU
};

namespace detail {

/// Separable Gaussian filtering over valid positions only.
inline std::vector<double> gauss_valid(const std::vector<double>& img, std::size_t w, std::size_t h,
                                       const std::vector<double>& g) {
    const std::size_t k = g.size(), wo = w - k + 1, ho = h - k + 1;
    std::vector<double> tmp(h * wo, 0.0), out(ho * wo, 0.0);
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < wo; ++c) {
            double acc = 0.0;
            for (std::size_t j = 0; j < k; ++j) acc += g[j] * img[r * w + c + j];
            tmp[r * wo + c] = acc;
        }
    for (std::size_t r = 0; r < ho; ++r)
        for (std::size_t c = 0; c < wo; ++c) {
            double acc = 0.0;
            for (std::size_t j = 0; j < k; ++j) acc += g[j] * tmp[(r + j) * wo + c];
            out[r * wo + c] = acc;
        }
    return out;
}

}  // namespace detail

/// Mean local SSIM with a normalized Gaussian window, over windows that fit
/// entirely inside the image.
inline double ssim(const ct::Image& a, const ct::Image& b, const SsimParams& p = {}) {
    ct::require_same_grid(a, b, "ssim");
    if (p.window % 2 == 0 || p.window == 0) throw UsageError("ssim: window must be odd");
    if (a.width < p.window || a.height < p.window) throw UsageError("ssim: image smaller than window");
    std::vector<double> g(p.window);
    double total = 0.0;
    const double half = 0.5 * static_cast<double>(p.window - 1);
    for (std::size_t i = 0; i < p.window; ++i) {
        const double d = static_cast<double>(i) - half;
        g[i] = std::exp(-d * d / (2.0 * p.sigma * p.sigma));
        total += g[i];
    }
    for (auto& v : g) v /= total;

    const std::size_t w = a.width, h = a.height, n = w * h;
    std::vector<double> aa(n), bb(n), ab(n);
    for (std::size_t i = 0; i < n; ++i) {
        aa[i] = a.values[i] * a.values[i];
        bb[i] = b.values[i] * b.values[i];
        ab[i] = a.values[i] * b.values[i];
    }
    const auto mu_a = detail::gauss_valid(a.values, w, h, g), mu_b = detail::gauss_valid(b.values, w, h, g);
    const auto e_aa = detail::gauss_valid(aa, w, h, g), e_bb = detail::gauss_valid(bb, w, h, g),
               e_ab = detail::gauss_valid(ab, w, h, g);
    const double c1 = (p.k1 * p.dynamic_range) * (p.k1 * p.dynamic_range);
    const double c2 = (p.k2 * p.dynamic_range) * (p.k2 * p.dynamic_range);
    double sum = 0.0;
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
        const double va = e_aa[i] - mu_a[i] * mu_a[i], vb = e_bb[i] - mu_b[i] * mu_b[i];
        const double cov = e_ab[i] - mu_a[i] * mu_b[i];
        sum += ((2.0 * mu_a[i] * mu_b[i] + c1) * (2.0 * cov + c2)) /
               ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2));
    }
    return sum / static_cast<double>(mu_a.size());
}

}  // namespace mar::eval
