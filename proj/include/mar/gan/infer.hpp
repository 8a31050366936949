#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "mar/core/error.hpp"
#include "mar/ct/fbp.hpp"
#include "mar/ct/geometry.hpp"
#include "mar/ct/hu.hpp"
#include "mar/ct/stack.hpp"
#include "mar/gan/bundle.hpp"
#include "mar/gan/train.hpp"

namespace mar::gan {

struct InferOptions {
    std::size_t out_size = 64;
    double pixel_size = 2.0;
    bool reconstruct = true;
    std::vector<std::size_t> recon_slices;  // empty: every slice
    std::size_t batch = 64;
    /// Image-domain metal masks per slice; with `metal_value` set, metal
    /// pixels of the reconstruction (in HU) are replaced by that constant.
    const std::vector<Mask>* metal_masks = nullptr;
    std::optional<double> metal_value;
};

struct InferResult {
    ct::SinogramStack sinograms;      // completed, data units
    ct::SinogramStack pc_sinograms;   // after the PC stage alone
    std::vector<ct::Image> images;    // HU, one per entry of recon slices
    std::vector<std::size_t> slices;  // slice index of each image
};

namespace detail {

/// Runs `model` on a set of equally sized planes. Inside the mask the result
/// is the model's output mapped back to data units; outside it is the input
/// value itself, untouched by the normalization round trip.
inline void complete_planes(const ModelBundle& model, std::vector<std::vector<double>>& planes, const std::vector<Mask>& masks,
                            std::size_t h, std::size_t w, std::size_t batch, bool zero_fill) {
    const auto& norm = model.norm;
    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < planes.size(); ++i)
        if (!masks[i].empty()) todo.push_back(i);
    for (std::size_t start = 0; start < todo.size(); start += batch) {
        const std::size_t nb = std::min(batch, todo.size() - start);
        std::vector<float> x(nb * h * w), s(nb * h * w);
        for (std::size_t b = 0; b < nb; ++b) {
            const auto& p = planes[todo[start + b]];
            const auto& m = masks[todo[start + b]];
            for (std::size_t i = 0; i < h * w; ++i) {
                s[b * h * w + i] = m.values[i];
                x[b * h * w + i] = m.values[i] && zero_fill ? 0.0f : static_cast<float>(norm.forward(p[i]));
            }
        }
        const ad::Shape shape{nb, 1, h, w};
        const auto y_hat = complete(model, ad::Tensor<float>(shape, std::move(x)), ad::Tensor<float>(shape, std::move(s)));
        for (std::size_t b = 0; b < nb; ++b) {
            auto& p = planes[todo[start + b]];
            const auto& m = masks[todo[start + b]];
            for (std::size_t i = 0; i < h * w; ++i)
                if (m.values[i]) p[i] = norm.inverse(static_cast<double>(y_hat[b * h * w + i]));
        }
    }
}

}  // namespace detail

/**
 * Two-stage completion of a volume's sinograms: the PC model fills each
 * view's projection (slices x detectors), projections are restacked into
 * sinograms, and the optional SC model adds its residual inside each slice's
 * trace. Selected slices are then reconstructed by FBP and converted to HU.
 */
inline InferResult infer_mar(const ct::SinogramStack& stack, const std::vector<Mask>& traces, const ModelBundle& pc,
                             const ModelBundle* sc, const ct::ScanGeometry& geom, const InferOptions& opts = {}) {
    ct::require_stack(stack);
    if (traces.size() != stack.size()) throw UsageError("infer_mar: one trace mask per slice required");
    const std::size_t nz = stack.size(), nv = stack[0].n_views, nd = stack[0].n_detectors;
    if (geom.n_views != nv || geom.n_detectors != nd) throw UsageError("infer_mar: geometry does not match sinograms");
    for (const auto& t : traces)
        if (t.width != nd || t.height != nv) throw UsageError("infer_mar: trace mask does not match sinogram shape");
    if (pc.stage != Stage::pc) throw UsageError("infer_mar: first model is not a projection-completion model");
    if (sc && sc->stage != Stage::sc) throw UsageError("infer_mar: second model is not a sinogram-correction model");

    InferResult res;
    res.sinograms = stack;
    std::vector<std::vector<double>> projections;
    std::vector<Mask> pmasks;
    for (std::size_t v = 0; v < nv; ++v) {
        projections.push_back(ct::projection_of(stack, v));
        pmasks.push_back(ct::projection_mask_of(traces, v));
    }
    detail::complete_planes(pc, projections, pmasks, nz, nd, opts.batch, true);
    for (std::size_t v = 0; v < nv; ++v)
        for (std::size_t z = 0; z < nz; ++z)
            for (std::size_t d = 0; d < nd; ++d)
                if (traces[z].at(v, d)) res.sinograms[z].at(v, d) = projections[v][z * nd + d];

    res.pc_sinograms = res.sinograms;
    if (sc) {
        std::vector<std::vector<double>> planes;
        for (const auto& s : res.sinograms) planes.push_back(s.values);
        detail::complete_planes(*sc, planes, traces, nv, nd, opts.batch, false);
        for (std::size_t z = 0; z < nz; ++z) res.sinograms[z].values = std::move(planes[z]);
    }

    if (!opts.reconstruct) return res;
    res.slices = opts.recon_slices;
    if (res.slices.empty())
        for (std::size_t z = 0; z < nz; ++z) res.slices.push_back(z);
    for (std::size_t z : res.slices) {
        if (z >= nz) throw UsageError("infer_mar: slice index out of range");
        auto img = ct::mu_to_hu(ct::fbp(res.sinograms[z], geom, opts.out_size, opts.pixel_size).image);
        if (opts.metal_value && opts.metal_masks) {
            const auto& m = opts.metal_masks->at(z);
            if (m.width != img.width || m.height != img.height) throw UsageError("infer_mar: metal mask size mismatch");
            for (std::size_t i = 0; i < img.values.size(); ++i)
                if (m.values[i]) img.values[i] = *opts.metal_value;
        }
        res.images.push_back(std::move(img));
    }
    return res;
}

}  // namespace mar::gan
