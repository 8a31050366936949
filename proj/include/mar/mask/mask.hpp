#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mar/core/error.hpp"

namespace mar {

enum class MaskDomain { image, projection, trace };

/// Binary mask, 1 = metal / missing. Row-major, height rows of width values.
/// For trace masks, rows are views and columns are detector bins.
struct Mask {
    std::size_t width = 0;
    std::size_t height = 0;
    MaskDomain domain = MaskDomain::image;
    std::vector<std::uint8_t> values;

    Mask() = default;
    Mask(std::size_t w, std::size_t h, MaskDomain d, std::uint8_t fill = 0) : width(w), height(h), domain(d), values(w * h, fill) {}

    std::uint8_t& at(std::size_t row, std::size_t col) { return values[row * width + col]; }
    std::uint8_t at(std::size_t row, std::size_t col) const { return values[row * width + col]; }

    std::size_t count() const { return static_cast<std::size_t>(std::count(values.begin(), values.end(), std::uint8_t{1})); }
    bool empty() const { return count() == 0; }
    double coverage() const { return values.empty() ? 0.0 : static_cast<double>(count()) / static_cast<double>(values.size()); }

    bool is_binary() const {
        return std::all_of(values.begin(), values.end(), [](std::uint8_t v) { return v <= 1; });
    }

    /// Elementwise A >= B.
    bool contains(const Mask& other) const {
        if (other.width != width || other.height != height) throw UsageError("Mask::contains: size mismatch");
        for (std::size_t i = 0; i < values.size(); ++i)
            if (other.values[i] && !values[i]) return false;
        return true;
    }
};

inline Mask mask_union(const Mask& a, const Mask& b) {
    if (a.width != b.width || a.height != b.height) throw UsageError("mask_union: size mismatch");
    Mask out = a;
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = a.values[i] | b.values[i];
    return out;
}

}  // namespace mar
