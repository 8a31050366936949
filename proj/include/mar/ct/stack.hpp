#pragma once

#include <cstddef>
#include <vector>

#include "mar/core/error.hpp"
#include "mar/ct/image.hpp"
#include "mar/mask/mask.hpp"

namespace mar::ct {

/// One sinogram per slice of a volume, all with the same geometry.
using SinogramStack = std::vector<Sinogram>;

inline void require_stack(const SinogramStack& stack) {
    if (stack.empty()) throw UsageError("empty sinogram stack");
    for (const auto& s : stack)
        if (s.n_views != stack[0].n_views || s.n_detectors != stack[0].n_detectors)
            throw UsageError("sinogram stack: slices differ in shape");
}

/// The data of one view across slices: rows are slices, columns detector bins.
inline std::vector<double> projection_of(const SinogramStack& stack, std::size_t view) {
    require_stack(stack);
    const std::size_t nd = stack[0].n_detectors;
    std::vector<double> out(stack.size() * nd);
    for (std::size_t z = 0; z < stack.size(); ++z)
        for (std::size_t d = 0; d < nd; ++d) out[z * nd + d] = stack[z].at(view, d);
    return out;
}

/// Projection-domain mask of one view from per-slice trace masks.
inline Mask projection_mask_of(const std::vector<Mask>& traces, std::size_t view) {
    if (traces.empty()) throw UsageError("no trace masks");
    const std::size_t nd = traces[0].width;
    Mask out(nd, traces.size(), MaskDomain::projection);
    for (std::size_t z = 0; z < traces.size(); ++z)
        for (std::size_t d = 0; d < nd; ++d) out.at(z, d) = traces[z].at(view, d);
    return out;
}

}  // namespace mar::ct
