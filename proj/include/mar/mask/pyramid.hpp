#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mar/core/error.hpp"
#include "mar/mask/mask.hpp"
#include "mar/tensor/ops.hpp"

namespace mar {

struct PoolSpec {
    std::size_t kernel = 4;
    std::size_t stride = 2;
    std::size_t padding = 1;

    friend bool operator==(const PoolSpec&, const PoolSpec&) = default;
};

/// One pooling layer per coupled convolution, with identical geometry.
struct PyramidSpec {
    std::vector<PoolSpec> levels;

    static PyramidSpec from_convs(const std::vector<ad::ConvSpec>& convs) {
        PyramidSpec p;
        for (const auto& c : convs) p.levels.push_back({c.kernel, c.stride, c.padding});
        return p;
    }

    /// Spatial sizes produced for an input extent; throws naming the failing level.
    std::vector<std::size_t> extents(std::size_t input) const {
        std::vector<std::size_t> out;
        std::size_t cur = input;
        for (std::size_t i = 0; i < levels.size(); ++i) {
            try {
                cur = ad::conv_output_extent(cur, levels[i].kernel, levels[i].stride, levels[i].padding);
            } catch (const ConfigError& e) {
                throw ConfigError("mask pyramid level " + std::to_string(i) + ": " + e.what());
            }
            out.push_back(cur);
        }
        return out;
    }
};

/// Converts masks to an [N,1,H,W] tensor of 0/1 values.
template <typename T>
ad::Tensor<T> mask_tensor(const std::vector<Mask>& masks) {
    if (masks.empty()) throw UsageError("mask_tensor: no masks");
    const auto w = masks[0].width, h = masks[0].height;
    std::vector<T> v;
    v.reserve(masks.size() * w * h);
    for (const auto& m : masks) {
        if (m.width != w || m.height != h) throw UsageError("mask_tensor: masks differ in size");
        for (auto x : m.values) v.push_back(static_cast<T>(x));
    }
    return ad::Tensor<T>({masks.size(), 1, h, w}, std::move(v));
}

/**
 * Successive padding-inclusive average pools of the mask: level 0 pools the
 * input with levels[0], level i pools level i-1 with levels[i]. Values stay
 * in [0, 1]; levels are not re-binarized.
 */
template <typename T>
std::vector<ad::Tensor<T>> mask_pyramid(const ad::Tensor<T>& mask, const PyramidSpec& spec) {
    if (mask.rank() != 4) throw ConfigError("mask_pyramid: expected [N,1,H,W] mask");
    spec.extents(mask.dim(2));
    spec.extents(mask.dim(3));
    std::vector<ad::Tensor<T>> out;
    ad::Tensor<T> cur = mask;
    for (const auto& lvl : spec.levels) {
        cur = ad::avg_pool2d(cur, lvl.kernel, lvl.stride, lvl.padding);
        out.push_back(cur);
    }
    return out;
}

template <typename T>
std::vector<ad::Tensor<T>> mask_pyramid(const Mask& mask, const PyramidSpec& spec) {
    return mask_pyramid<T>(mask_tensor<T>({mask}), spec);
}

}  // namespace mar
