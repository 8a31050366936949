#pragma once

#include <cstdint>

#include "mar/core/error.hpp"
#include "mar/core/random.hpp"
#include "mar/mask/mask.hpp"

namespace mar {

struct Placement {
    long row = 0;  // top-left corner of the library mask on the canvas
    long col = 0;
    bool flip_rows = false;
    bool flip_cols = false;
};

struct PlacedMask {
    Mask mask;
    bool outside = false;  // nothing of the library mask landed on the canvas
};

/// Translated (optionally flipped) copy of `library` on an empty canvas; clipped at borders.
inline PlacedMask place_metal_mask(const Mask& library, std::size_t width, std::size_t height, const Placement& at,
                                   MaskDomain domain = MaskDomain::projection) {
    if (library.empty()) throw UsageError("place_metal_mask: library mask is empty");
    PlacedMask out{Mask(width, height, domain), false};
    for (std::size_t r = 0; r < library.height; ++r)
        for (std::size_t c = 0; c < library.width; ++c) {
            const std::size_t sr = at.flip_rows ? library.height - 1 - r : r;
            const std::size_t sc = at.flip_cols ? library.width - 1 - c : c;
            if (!library.at(sr, sc)) continue;
            const long tr = at.row + static_cast<long>(r), tc = at.col + static_cast<long>(c);
            if (tr < 0 || tc < 0 || tr >= static_cast<long>(height) || tc >= static_cast<long>(width)) continue;
            out.mask.at(static_cast<std::size_t>(tr), static_cast<std::size_t>(tc)) = 1;
        }
    out.outside = out.mask.empty();
    return out;
}

/// Random position that keeps the library mask's box centre on the canvas, plus random flips.
inline Placement random_placement(const Mask& library, std::size_t width, std::size_t height, std::uint64_t seed) {
    CounterRng rng(derive_seed(seed, 0x91ace));
    Placement p;
    p.row = rng.uniform_int(0, static_cast<long long>(height) - 1) - static_cast<long>(library.height / 2);
    p.col = rng.uniform_int(0, static_cast<long long>(width) - 1) - static_cast<long>(library.width / 2);
    p.flip_rows = rng.uniform() < 0.5;
    p.flip_cols = rng.uniform() < 0.5;
    return p;
}

}  // namespace mar
