#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "mar/core/error.hpp"
#include "mar/mask/pyramid.hpp"
#include "mar/tensor/ops.hpp"

namespace mar::gan {

inline std::string activation_name(ad::ActivationKind k) {
    switch (k) {
        case ad::ActivationKind::identity: return "identity";
        case ad::ActivationKind::leaky_relu: return "leaky_relu";
        case ad::ActivationKind::relu: return "relu";
        case ad::ActivationKind::tanh: return "tanh";
        case ad::ActivationKind::sigmoid: return "sigmoid";
    }
    return "?";
}

inline ad::ActivationKind activation_from_name(const std::string& s) {
    for (auto k : {ad::ActivationKind::identity, ad::ActivationKind::leaky_relu, ad::ActivationKind::relu,
                   ad::ActivationKind::tanh, ad::ActivationKind::sigmoid})
        if (activation_name(k) == s) return k;
    throw ConfigError("unknown activation '" + s + "'");
}

/**
 * Encoder-decoder generator. Encoder block i is conv -> activation, then
 * (with the MPN) the i-th mask pyramid level is appended as one extra channel.
 * Decoder block j is a transposed convolution; with skips, its input is the
 * previous decoder output concatenated with the matching encoder output.
 * The `in_channels` of every spec already counts the extra channels.
 */
struct GeneratorConfig {
    std::size_t in_channels = 1;
    std::size_t out_channels = 1;
    std::vector<ad::ConvSpec> encoder;
    std::vector<ad::ConvSpec> decoder;
    ad::Activation encoder_act{ad::ActivationKind::leaky_relu, 0.2};
    ad::Activation decoder_act{ad::ActivationKind::relu};
    ad::Activation output_act{ad::ActivationKind::tanh};
    bool mpn = true;
    bool skips = true;
    bool zero_init_output = false;  // residual (SC) models start at G(x) = 0

    /// Builds a consistent config from channel widths; every block uses k, s, p.
    static GeneratorConfig make(const std::vector<std::size_t>& widths, bool mpn = true, bool skips = true,
                                std::size_t k = 4, std::size_t s = 2, std::size_t p = 1, std::size_t in_ch = 1,
                                std::size_t out_ch = 1) {
        if (widths.empty()) throw ConfigError("generator needs at least one encoder block");
        GeneratorConfig g;
        g.in_channels = in_ch;
        g.out_channels = out_ch;
        g.mpn = mpn;
        g.skips = skips;
        const std::size_t extra = mpn ? 1 : 0;
        std::size_t cin = in_ch;
        for (std::size_t w : widths) {
            g.encoder.push_back({cin, w, k, s, p});
            cin = w + extra;
        }
        const std::size_t n = widths.size();
        for (std::size_t j = 0; j < n; ++j) {
            const bool last = j + 1 == n;
            const std::size_t cout = last ? out_ch : widths[n - 2 - j];
            g.decoder.push_back({cin, cout, k, s, p});
            if (!last) cin = cout + (skips ? widths[n - 2 - j] + extra : 0);
        }
        g.validate();
        return g;
    }

    /// Full-size default: 32 -> 64 -> 128 -> 256.
    static GeneratorConfig standard(bool mpn = true) { return make({32, 64, 128, 256}, mpn); }

    std::size_t depth() const { return encoder.size(); }

    PyramidSpec pyramid() const { return PyramidSpec::from_convs(encoder); }

    void validate() const {
        if (encoder.empty()) throw ConfigError("generator has no encoder blocks");
        if (decoder.size() != encoder.size()) throw ConfigError("generator decoder must mirror the encoder");
        const std::size_t extra = mpn ? 1 : 0;
        if (encoder[0].in_channels != in_channels) throw ConfigError("encoder block 0: in_channels mismatch");
        for (std::size_t i = 0; i < encoder.size(); ++i) {
            if (i > 0 && encoder[i].in_channels != encoder[i - 1].out_channels + extra)
                throw ConfigError("encoder block " + std::to_string(i) + ": in_channels mismatch");
        }
        const std::size_t n = encoder.size();
        for (std::size_t j = 0; j < n; ++j) {
            const auto& d = decoder[j];
            const auto& mirror = encoder[n - 1 - j];
            if (d.kernel != mirror.kernel || d.stride != mirror.stride || d.padding != mirror.padding)
                throw ConfigError("decoder block " + std::to_string(j) + " does not mirror encoder block " +
                                  std::to_string(n - 1 - j));
            std::size_t expect_in = encoder[n - 1].out_channels + extra;
            if (j > 0) expect_in = decoder[j - 1].out_channels + (skips ? encoder[n - 1 - j].out_channels + extra : 0);
            if (d.in_channels != expect_in) throw ConfigError("decoder block " + std::to_string(j) + ": in_channels mismatch");
            const std::size_t expect_out = j + 1 == n ? out_channels : encoder[n - 2 - j].out_channels;
            if (d.out_channels != expect_out) throw ConfigError("decoder block " + std::to_string(j) + ": out_channels mismatch");
        }
    }

    /// Spatial extents after each encoder block. Throws unless the decoder
    /// restores `extent` exactly.
    std::vector<std::size_t> feature_extents(std::size_t extent) const {
        auto ext = pyramid().extents(extent);
        std::size_t cur = ext.back();
        for (std::size_t j = 0; j < decoder.size(); ++j) {
            const auto& d = decoder[j];
            cur = ad::conv_transpose_output_extent(cur, d.kernel, d.stride, d.padding);
            const std::size_t want = j + 1 == decoder.size() ? extent : ext[ext.size() - 2 - j];
            if (cur != want)
                throw ConfigError("input extent " + std::to_string(extent) + " is not restored by decoder block " +
                                  std::to_string(j) + " (got " + std::to_string(cur) + ", need " +
                                  std::to_string(want) + ")");
        }
        return ext;
    }
};

/// Patch discriminator: conv blocks, then a 1-channel score head. No dense layers.
struct DiscriminatorConfig {
    std::vector<ad::ConvSpec> blocks;  // the last one is the score head
    ad::Activation act{ad::ActivationKind::leaky_relu, 0.2};

    static DiscriminatorConfig make(const std::vector<std::size_t>& widths, std::size_t in_ch = 1) {
        DiscriminatorConfig d;
        std::size_t cin = in_ch;
        for (std::size_t w : widths) {
            d.blocks.push_back({cin, w, 4, 2, 1});
            cin = w;
        }
        d.blocks.push_back({cin, 1, 3, 1, 1});
        d.validate();
        return d;
    }

    static DiscriminatorConfig standard() { return make({32, 64, 128}); }

    /// N(s) uses the same pooling geometry down to the score map.
    PyramidSpec modulation() const { return PyramidSpec::from_convs(blocks); }

    void validate() const {
        if (blocks.empty()) throw ConfigError("discriminator has no blocks");
        for (std::size_t i = 1; i < blocks.size(); ++i)
            if (blocks[i].in_channels != blocks[i - 1].out_channels)
                throw ConfigError("discriminator block " + std::to_string(i) + ": in_channels mismatch");
        if (blocks.back().out_channels != 1) throw ConfigError("discriminator score head must have one channel");
    }
};

struct LossWeights {
    double lambda = 100.0;

    void validate() const {
        if (!(lambda >= 0.0)) throw ConfigError("lambda must be non-negative");
    }
};

}  // namespace mar::gan
