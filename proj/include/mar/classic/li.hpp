#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "mar/core/error.hpp"
#include "mar/ct/image.hpp"
#include "mar/mask/mask.hpp"

namespace mar::classic {

struct Completion {
    ct::Sinogram sinogram;
    bool flagged = false;  // a degraded path was taken (see each function)
};

inline void require_trace_matches(const ct::Sinogram& s, const Mask& trace, const char* op) {
    if (trace.height != s.n_views || trace.width != s.n_detectors)
        throw UsageError(std::string(op) + ": trace shape does not match sinogram");
}

/**
 * Linear interpolation across every maximal traced run of each view, using
 * the nearest untraced bins on either side (constant extension at the
 * detector edges). Untraced values are copied unchanged. A fully traced view
 * takes the values of the nearest view that has any untraced bin, and sets
 * `flagged`.
 */
inline Completion li_complete(const ct::Sinogram& sino, const Mask& trace) {
    require_trace_matches(sino, trace, "li_complete");
    Completion out{sino, false};
    const std::size_t nd = sino.n_detectors, nv = sino.n_views;
    std::vector<bool> full_row(nv, false);
    for (std::size_t v = 0; v < nv; ++v) {
        const auto* t = trace.values.data() + v * nd;
        const double* in = sino.values.data() + v * nd;
        double* row = out.sinogram.values.data() + v * nd;
        std::size_t d = 0;
        bool any_known = false;
        for (std::size_t k = 0; k < nd; ++k) any_known = any_known || !t[k];
        if (!any_known) {
            full_row[v] = true;
            continue;
        }
        while (d < nd) {
            if (!t[d]) {
                ++d;
                continue;
            }
            const std::size_t start = d;
            while (d < nd && t[d]) ++d;
            const bool has_left = start > 0, has_right = d < nd;
            const double left = has_left ? in[start - 1] : in[d];
            const double right = has_right ? in[d] : in[start - 1];
            const double span = static_cast<double>(d - start + 1);
            for (std::size_t k = start; k < d; ++k) {
                if (has_left && has_right) {
                    const double w = static_cast<double>(k - start + 1) / span;
                    row[k] = (1.0 - w) * left + w * right;
                } else {
                    row[k] = has_left ? left : right;
                }
            }
        }
    }
    for (std::size_t v = 0; v < nv; ++v) {
        if (!full_row[v]) continue;
        out.flagged = true;
        for (std::size_t dist = 1; dist < nv; ++dist) {
            const std::size_t cand[2] = {(v + nv - dist % nv) % nv, (v + dist) % nv};
            bool done = false;
            for (std::size_t c : cand) {
                if (full_row[c]) continue;
                std::copy_n(out.sinogram.values.data() + c * nd, nd, out.sinogram.values.data() + v * nd);
                done = true;
                break;
            }
            if (done) break;
        }
    }
    return out;
}

}  // namespace mar::classic
