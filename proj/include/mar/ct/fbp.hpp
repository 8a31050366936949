#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

#include "mar/core/error.hpp"
#include "mar/ct/geometry.hpp"
#include "mar/ct/image.hpp"

namespace mar::ct {

enum class FilterWindow { ram_lak, cosine };

struct FbpOptions {
    FilterWindow window = FilterWindow::ram_lak;
};

struct FbpResult {
    Image image;
    bool degraded = false;  // fewer than 8 views
};

namespace detail {

/// Band-limited ramp kernel sampled at spacing tau, indices -(n-1)..(n-1),
/// optionally cosine-apodized in the frequency domain.
inline std::vector<double> ramp_kernel(std::size_t n, double tau, FilterWindow window) {
    const std::size_t len = 2 * n - 1;
    std::vector<double> h(len, 0.0);
    const double pi2 = std::numbers::pi * std::numbers::pi;
    for (std::size_t i = 0; i < len; ++i) {
        const long k = static_cast<long>(i) - static_cast<long>(n - 1);
        if (k == 0)
            h[i] = 1.0 / (4.0 * tau * tau);
        else if (k % 2 != 0)
            h[i] = -1.0 / (static_cast<double>(k * k) * pi2 * tau * tau);
    }
    if (window == FilterWindow::ram_lak) return h;

    // Circular DFT over a padded period, window the response, transform back.
    std::size_t period = 1;
    while (period < 2 * len) period <<= 1;
    std::vector<double> circ(period, 0.0);
    for (std::size_t i = 0; i < len; ++i) {
        const long k = static_cast<long>(i) - static_cast<long>(n - 1);
        circ[static_cast<std::size_t>((k + static_cast<long>(period)) % static_cast<long>(period))] = h[i];
    }
    std::vector<double> response(period);
    for (std::size_t f = 0; f < period; ++f) {
        std::complex<double> acc{};
        for (std::size_t i = 0; i < period; ++i)
            acc += circ[i] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(f * i % period) / static_cast<double>(period));
        // Folded frequency in [0, 0.5] cycles per sample.
        const double nu = static_cast<double>(std::min(f, period - f)) / static_cast<double>(period);
        response[f] = acc.real() * std::cos(std::numbers::pi * nu);
    }
    for (std::size_t i = 0; i < len; ++i) {
        const long k = static_cast<long>(i) - static_cast<long>(n - 1);
        const auto idx = static_cast<std::size_t>((k + static_cast<long>(period)) % static_cast<long>(period));
        double acc = 0.0;
        for (std::size_t f = 0; f < period; ++f)
            acc += response[f] * std::cos(2.0 * std::numbers::pi * static_cast<double>(f * idx % period) / static_cast<double>(period));
        h[i] = acc / static_cast<double>(period);
    }
    return h;
}

inline std::vector<double> filter_row(const double* row, std::size_t n, const std::vector<double>& kernel, double tau) {
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += row[j] * kernel[i + (n - 1) - j];
        out[i] = acc * tau;
    }
    return out;
}

inline double sample_linear(const std::vector<double>& q, double idx) {
    const double fl = std::floor(idx);
    const long i0 = static_cast<long>(fl);
    const long n = static_cast<long>(q.size());
    if (i0 < -1 || i0 >= n) return 0.0;
    const double frac = idx - fl;
    double v = 0.0;
    if (i0 >= 0) v += (1.0 - frac) * q[static_cast<std::size_t>(i0)];
    if (i0 + 1 < n) v += frac * q[static_cast<std::size_t>(i0 + 1)];
    return v;
}

}  // namespace detail

/**
 * Filtered back-projection onto an out_size x out_size grid with the given
 * pixel size. Parallel beam: ramp filter + linear-interpolation
 * back-projection. Fan beam (flat virtual detector, full scan): cosine
 * pre-weighting, half ramp filter, distance-weighted back-projection.
 */
inline FbpResult fbp(const Sinogram& sino, const ScanGeometry& geom, std::size_t out_size, double pixel_size,
                     FbpOptions opts = {}) {
    geom.validate();
    if (sino.n_views != geom.n_views || sino.n_detectors != geom.n_detectors)
        throw UsageError("fbp: sinogram shape does not match geometry");
    FbpResult res{Image(out_size, out_size, pixel_size), geom.n_views < 8};
    geom.validate(res.image);
    const std::size_t nd = geom.n_detectors;
    const double tau = geom.detector_spacing;
    const auto kernel = detail::ramp_kernel(nd, tau, opts.window);
    Image& img = res.image;

    std::vector<double> weighted(nd);
    for (std::size_t v = 0; v < geom.n_views; ++v) {
        const double angle = geom.view_angle(v);
        const double c = std::cos(angle), s = std::sin(angle);
        const double* row = sino.values.data() + v * nd;
        if (geom.beam == Beam::parallel) {
            const auto q = detail::filter_row(row, nd, kernel, tau);
            const double w = std::numbers::pi / static_cast<double>(geom.n_views);
            for (std::size_t r = 0; r < out_size; ++r) {
                const double y = img.y_of(r);
                for (std::size_t col = 0; col < out_size; ++col) {
                    const double u = img.x_of(col) * c + y * s;
                    img.at(r, col) += w * detail::sample_linear(q, geom.detector_index(u));
                }
            }
        } else {
            const double big_r = geom.source_to_center;
            for (std::size_t d = 0; d < nd; ++d) {
                const double u = geom.detector_u(d);
                weighted[d] = row[d] * big_r / std::sqrt(big_r * big_r + u * u);
            }
            auto q = detail::filter_row(weighted.data(), nd, kernel, tau);
            for (auto& val : q) val *= 0.5;
            const double dbeta = geom.angular_range / static_cast<double>(geom.n_views);
            for (std::size_t r = 0; r < out_size; ++r) {
                const double y = img.y_of(r);
                for (std::size_t col = 0; col < out_size; ++col) {
                    const double x = img.x_of(col);
                    const double depth = big_r - (x * c + y * s);
                    const double u = big_r * (-x * s + y * c) / depth;
                    const double mag = depth / big_r;
                    img.at(r, col) += dbeta * detail::sample_linear(q, geom.detector_index(u)) / (mag * mag);
                }
            }
        }
    }
    return res;
}

}  // namespace mar::ct
