#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "mar/core/error.hpp"
#include "mar/core/random.hpp"
#include "mar/mask/mask.hpp"
#include "mar/tensor/tensor.hpp"

namespace mar::gan {

/// Linear map of the data range [lo, hi] onto [-1, 1].
struct Normalization {
    double lo = 0.0;
    double hi = 1.0;

    void validate() const {
        if (!(hi > lo)) throw ConfigError("normalization range must satisfy hi > lo");
    }
    double forward(double v) const { return 2.0 * (v - lo) / (hi - lo) - 1.0; }
    double inverse(double v) const { return lo + 0.5 * (v + 1.0) * (hi - lo); }
    /// Scale factor from normalized differences back to data units.
    double half_range() const { return 0.5 * (hi - lo); }

    static Normalization of(const std::vector<double>& values) {
        if (values.empty()) throw UsageError("Normalization::of: no values");
        const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
        Normalization n{*mn, *mx};
        if (!(n.hi > n.lo)) n.hi = n.lo + 1.0;
        return n;
    }
};

/// One normalized training pair. x equals y wherever s is 0.
struct TrainingSample {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<float> x;
    std::vector<float> y;
    Mask s;

    void validate() const {
        const std::size_t n = width * height;
        if (x.size() != n || y.size() != n || s.width != width || s.height != height)
            throw UsageError("training sample: inconsistent sizes");
        if (!s.is_binary()) throw UsageError("training sample: mask is not binary");
        for (std::size_t i = 0; i < n; ++i)
            if (!s.values[i] && x[i] != y[i]) throw UsageError("training sample: x differs from y outside the mask");
    }

    /// Masked input for completion: the target with masked values set to `fill`.
    static TrainingSample masked(std::size_t w, std::size_t h, std::vector<float> y, Mask s, float fill = 0.0f) {
        TrainingSample t{w, h, y, std::move(y), std::move(s)};
        for (std::size_t i = 0; i < t.x.size(); ++i)
            if (t.s.values[i]) t.x[i] = fill;
        return t;
    }
};

/// Training-time transforms that map a pair onto another physically valid pair.
/// projection: independent flips of both axes (mirror images of the object).
/// sinogram: circular view shift plus an optional mirror; needs a full 2*pi scan
/// (rows are views, columns detector bins centred on the axis).
enum class Augment { none, projection, sinogram };

/// out(r, c) = t(src_r, src_c) with src_r = ((reverse_rows ? -r : r) + row_offset) mod h
/// and src_c = flip_cols ? w - 1 - c : c. Applied to x, y and s alike.
inline TrainingSample remapped(const TrainingSample& t, bool reverse_rows, std::size_t row_offset, bool flip_cols) {
    const auto w = t.width, h = t.height;
    TrainingSample out{w, h, std::vector<float>(t.x.size()), std::vector<float>(t.y.size()), t.s};
    for (std::size_t r = 0; r < h; ++r) {
        const std::size_t sr = ((reverse_rows ? h - r : r) + row_offset) % h;
        for (std::size_t c = 0; c < w; ++c) {
            const std::size_t sc = flip_cols ? w - 1 - c : c;
            out.x[r * w + c] = t.x[sr * w + sc];
            out.y[r * w + c] = t.y[sr * w + sc];
            out.s.values[r * w + c] = t.s.values[sr * w + sc];
        }
    }
    return out;
}

inline TrainingSample augmented(const TrainingSample& t, Augment mode, CounterRng& rng) {
    switch (mode) {
        case Augment::none: return t;
        case Augment::projection: {
            const bool flip_rows = rng.uniform() < 0.5;
            const bool flip_cols = rng.uniform() < 0.5;
            return remapped(t, flip_rows, flip_rows ? t.height - 1 : 0, flip_cols);
        }
        case Augment::sinogram: {
            // Mirroring the object about the x axis sends (view v, bin d) to (-v mod n, n_d - 1 - d).
            const auto shift = static_cast<std::size_t>(rng.uniform_int(0, static_cast<long long>(t.height) - 1));
            const bool mirror = rng.uniform() < 0.5;
            return remapped(t, mirror, shift, mirror);
        }
    }
    return t;
}

struct Batch {
    ad::Tensor<float> x, y, s;
};

inline Batch make_batch(const std::vector<TrainingSample>& data, const std::vector<std::size_t>& idx) {
    if (idx.empty()) throw UsageError("make_batch: empty batch");
    const auto w = data[idx[0]].width, h = data[idx[0]].height, plane = w * h;
    std::vector<float> x(idx.size() * plane), y(x.size()), s(x.size());
    for (std::size_t b = 0; b < idx.size(); ++b) {
        const auto& t = data[idx[b]];
        if (t.width != w || t.height != h) throw UsageError("make_batch: samples differ in size");
        std::copy(t.x.begin(), t.x.end(), x.begin() + static_cast<std::ptrdiff_t>(b * plane));
        std::copy(t.y.begin(), t.y.end(), y.begin() + static_cast<std::ptrdiff_t>(b * plane));
        for (std::size_t i = 0; i < plane; ++i) s[b * plane + i] = static_cast<float>(t.s.values[i]);
    }
    const ad::Shape shape{idx.size(), 1, h, w};
    return {ad::Tensor<float>(shape, std::move(x)), ad::Tensor<float>(shape, std::move(y)),
            ad::Tensor<float>(shape, std::move(s))};
}

}  // namespace mar::gan
