#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mar/core/error.hpp"
#include "mar/core/random.hpp"
#include "mar/gan/config.hpp"
#include "mar/mask/pyramid.hpp"
#include "mar/tensor/init.hpp"
#include "mar/tensor/ops.hpp"

namespace mar::gan {

/// Ordered, named parameter tensors (weight then bias, per layer).
template <typename T>
struct ParamSet {
    std::vector<std::string> names;
    std::vector<ad::Tensor<T>> tensors;

    void add(std::string name, ad::Tensor<T> t) {
        names.push_back(std::move(name));
        tensors.push_back(std::move(t));
    }

    std::size_t scalar_count() const {
        std::size_t n = 0;
        for (const auto& t : tensors) n += t.size();
        return n;
    }

    /// Value copies cut from any graph, without requires_grad.
    ParamSet frozen() const {
        ParamSet out;
        for (std::size_t i = 0; i < tensors.size(); ++i) out.add(names[i], tensors[i].detach());
        return out;
    }

    std::vector<std::vector<T>> snapshot() const {
        std::vector<std::vector<T>> v;
        for (const auto& t : tensors) v.emplace_back(t.data().begin(), t.data().end());
        return v;
    }

    void restore(const std::vector<std::vector<T>>& v) {
        if (v.size() != tensors.size()) throw UsageError("ParamSet::restore: count mismatch");
        for (std::size_t i = 0; i < v.size(); ++i)
            tensors[i].update_values([&](std::span<T> dst) { std::copy(v[i].begin(), v[i].end(), dst.begin()); });
    }
};

inline constexpr double kInitStd = 0.02;

template <typename T>
ParamSet<T> init_generator(const GeneratorConfig& g, std::uint64_t seed) {
    g.validate();
    std::mt19937_64 rng(derive_seed(seed, 0x6e6));
    ParamSet<T> ps;
    for (std::size_t i = 0; i < g.encoder.size(); ++i) {
        const auto& c = g.encoder[i];
        ps.add("enc" + std::to_string(i) + ".weight",
               ad::normal_init<T>({c.out_channels, c.in_channels, c.kernel, c.kernel}, kInitStd, rng));
        ps.add("enc" + std::to_string(i) + ".bias", ad::zeros_param<T>({c.out_channels}));
    }
    for (std::size_t j = 0; j < g.decoder.size(); ++j) {
        const auto& c = g.decoder[j];
        const ad::Shape shape{c.in_channels, c.out_channels, c.kernel, c.kernel};
        const bool zero = g.zero_init_output && j + 1 == g.decoder.size();
        ps.add("dec" + std::to_string(j) + ".weight",
               zero ? ad::zeros_param<T>(shape) : ad::normal_init<T>(shape, kInitStd, rng));
        ps.add("dec" + std::to_string(j) + ".bias", ad::zeros_param<T>({c.out_channels}));
    }
    return ps;
}

template <typename T>
ParamSet<T> init_discriminator(const DiscriminatorConfig& d, std::uint64_t seed) {
    d.validate();
    std::mt19937_64 rng(derive_seed(seed, 0xd15));
    ParamSet<T> ps;
    for (std::size_t i = 0; i < d.blocks.size(); ++i) {
        const auto& c = d.blocks[i];
        ps.add("blk" + std::to_string(i) + ".weight",
               ad::normal_init<T>({c.out_channels, c.in_channels, c.kernel, c.kernel}, kInitStd, rng));
        ps.add("blk" + std::to_string(i) + ".bias", ad::zeros_param<T>({c.out_channels}));
    }
    return ps;
}

template <typename T>
void require_param_layout(const ParamSet<T>& ps, std::size_t layers, const char* what) {
    if (ps.tensors.size() != 2 * layers)
        throw ConfigError(std::string(what) + ": expected " + std::to_string(2 * layers) + " parameter tensors, got " +
                          std::to_string(ps.tensors.size()));
}

/**
 * G(x) for x [N,C,H,W] and mask s [N,1,H,W] (ignored when the MPN is off).
 * The output has the input's spatial size.
 */
template <typename T>
ad::Tensor<T> forward_generator(const ad::Tensor<T>& x, const ad::Tensor<T>& s, const GeneratorConfig& g,
                                const ParamSet<T>& params) {
    if (x.rank() != 4) throw ConfigError("forward_generator: expected NCHW input, got " + ad::to_string(x.shape()));
    if (x.dim(1) != g.in_channels)
        throw ConfigError("forward_generator: input has " + std::to_string(x.dim(1)) + " channels, config expects " +
                          std::to_string(g.in_channels));
    g.feature_extents(x.dim(2));
    g.feature_extents(x.dim(3));
    const std::size_t n = g.depth();
    require_param_layout(params, 2 * n, "forward_generator");
    std::vector<ad::Tensor<T>> levels;
    if (g.mpn) {
        if (s.rank() != 4 || s.dim(0) != x.dim(0) || s.dim(1) != 1 || s.dim(2) != x.dim(2) || s.dim(3) != x.dim(3))
            throw ConfigError("forward_generator: mask shape " + ad::to_string(s.shape()) + " does not match input " +
                              ad::to_string(x.shape()));
        levels = mask_pyramid<T>(s, g.pyramid());
    }
    std::vector<ad::Tensor<T>> skips;
    ad::Tensor<T> h = x;
    for (std::size_t i = 0; i < n; ++i) {
        h = ad::activation(ad::conv2d(h, g.encoder[i], params.tensors[2 * i], params.tensors[2 * i + 1]), g.encoder_act);
        if (g.mpn) h = ad::concat_channels(h, levels[i]);
        skips.push_back(h);
    }
    for (std::size_t j = 0; j < n; ++j) {
        if (j > 0 && g.skips) h = ad::concat_channels(h, skips[n - 1 - j]);
        const std::size_t k = 2 * (n + j);
        h = ad::conv_transpose2d(h, g.decoder[j], params.tensors[k], params.tensors[k + 1]);
        h = ad::activation(h, j + 1 == n ? g.output_act : g.decoder_act);
    }
    return h;
}

/// Patch score map D(img), [N,1,h,w].
template <typename T>
ad::Tensor<T> forward_discriminator(const ad::Tensor<T>& img, const DiscriminatorConfig& d, const ParamSet<T>& params) {
    require_param_layout(params, d.blocks.size(), "forward_discriminator");
    d.modulation().extents(img.dim(2));
    d.modulation().extents(img.dim(3));
    ad::Tensor<T> h = img;
    for (std::size_t i = 0; i < d.blocks.size(); ++i) {
        h = ad::conv2d(h, d.blocks[i], params.tensors[2 * i], params.tensors[2 * i + 1]);
        if (i + 1 < d.blocks.size()) h = ad::activation(h, d.act);
    }
    return h;
}

/// N(s): the mask pooled to the score map's size. Only the last level is used.
template <typename T>
ad::Tensor<T> modulation_map(const ad::Tensor<T>& s, const DiscriminatorConfig& d) {
    return mask_pyramid<T>(s, d.modulation()).back();
}

}  // namespace mar::gan
