#include <gtest/gtest.h>

#include <filesystem>

#include "mar/mask/blob.hpp"
#include "mar/mask/library.hpp"
#include "mar/mask/placement.hpp"
#include "mar/mask/pyramid.hpp"

using namespace mar;

TEST(BlobMask, ZeroBlobsIsEmpty) {
    BlobParams p;
    p.min_blobs = p.max_blobs = 0;
    EXPECT_TRUE(gen_blob_mask(64, 64, p, 1).empty());
}

TEST(BlobMask, SeedDeterminism) {
    auto a = gen_blob_mask(64, 64, BlobParams{}, 42);
    auto b = gen_blob_mask(64, 64, BlobParams{}, 42);
    auto c = gen_blob_mask(64, 64, BlobParams{}, 43);
    EXPECT_EQ(a.values, b.values);
    EXPECT_NE(a.values, c.values);
    EXPECT_TRUE(a.is_binary());
}

TEST(BlobMask, MeanCoverageRegressionBound) {
    double total = 0.0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) total += gen_blob_mask(64, 64, BlobParams{}, static_cast<std::uint64_t>(i)).coverage();
    const double mean = total / n;
    RecordProperty("mean_coverage", std::to_string(mean));
    EXPECT_GE(mean, 0.02);
    EXPECT_LE(mean, 0.25);
}

TEST(BlobMask, InvalidParams) {
    BlobParams p;
    p.min_radius = 0.3;
    p.max_radius = 0.1;
    EXPECT_THROW(gen_blob_mask(8, 8, p, 1), ConfigError);
}

TEST(Placement, OriginWithoutTransformIsIdentity) {
    auto lib = builtin_metal_library()[9];
    auto placed = place_metal_mask(lib, lib.width, lib.height, Placement{});
    EXPECT_EQ(placed.mask.values, lib.values);
    EXPECT_FALSE(placed.outside);
}

TEST(Placement, FullyOutsideIsEmptyWithFlag) {
    auto lib = builtin_metal_library()[0];
    auto placed = place_metal_mask(lib, 64, 64, Placement{100, 100});
    EXPECT_TRUE(placed.mask.empty());
    EXPECT_TRUE(placed.outside);
}

TEST(Placement, ClippingOnlyShrinksAndFlipsPreserveCount) {
    const auto lib = builtin_metal_library();
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto& m = lib[seed % lib.size()];
        auto placed = place_metal_mask(m, 64, 64, random_placement(m, 64, 64, seed));
        EXPECT_LE(placed.mask.count(), m.count());
    }
    auto flipped = place_metal_mask(lib[12], 64, 64, Placement{10, 10, true, true});
    EXPECT_EQ(flipped.mask.count(), lib[12].count());
    EXPECT_THROW(place_metal_mask(Mask(4, 4, MaskDomain::projection), 8, 8, Placement{}), UsageError);
}

TEST(Library, BundledShapesAreNonemptyAndRoundTripThroughPng) {
    const auto lib = builtin_metal_library();
    ASSERT_GE(lib.size(), 30u);
    for (const auto& m : lib) {
        EXPECT_FALSE(m.empty());
        EXPECT_LT(m.coverage(), 0.9);
    }
    const auto dir = std::filesystem::temp_directory_path() / "mar_test_library";
    std::filesystem::remove_all(dir);
    save_metal_library(dir, lib);
    const auto loaded = load_metal_library(dir);
    ASSERT_EQ(loaded.size(), lib.size());
    for (std::size_t i = 0; i < lib.size(); ++i) EXPECT_EQ(loaded[i].values, lib[i].values) << i;
    std::filesystem::remove_all(dir);
    EXPECT_THROW(load_metal_library(dir), ConfigError);
}

TEST(Pyramid, AllOnesPaddedPooling) {
    Mask ones(64, 64, MaskDomain::projection, 1);
    auto levels = mask_pyramid<double>(ones, PyramidSpec{{{4, 2, 1}}});
    ASSERT_EQ(levels.size(), 1u);
    const auto& l = levels[0];
    ASSERT_EQ(l.shape(), (ad::Shape{1, 1, 32, 32}));
    auto at = [&](std::size_t r, std::size_t c) { return l[r * 32 + c]; };
    EXPECT_EQ(at(0, 0), 9.0 / 16.0);
    EXPECT_EQ(at(31, 31), 9.0 / 16.0);
    EXPECT_EQ(at(0, 10), 12.0 / 16.0);
    for (std::size_t r = 1; r < 31; ++r)
        for (std::size_t c = 1; c < 31; ++c) EXPECT_EQ(at(r, c), 1.0);
}

TEST(Pyramid, EmptyMaskGivesZeroLevels) {
    auto levels = mask_pyramid<double>(Mask(64, 64, MaskDomain::projection), PyramidSpec{{{4, 2, 1}, {4, 2, 1}, {3, 1, 1}}});
    for (const auto& l : levels)
        for (double v : l.data()) EXPECT_EQ(v, 0.0);
}

TEST(Pyramid, BoundedAndMonotone) {
    const PyramidSpec spec{{{4, 2, 1}, {4, 2, 1}, {4, 2, 1}, {4, 2, 1}}};
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        auto small = gen_blob_mask(64, 64, BlobParams{}, seed);
        auto big = mask_union(small, gen_blob_mask(64, 64, BlobParams{}, seed + 1000));
        auto ls = mask_pyramid<double>(small, spec), lb = mask_pyramid<double>(big, spec);
        for (std::size_t i = 0; i < spec.levels.size(); ++i)
            for (std::size_t k = 0; k < ls[i].size(); ++k) {
                EXPECT_GE(ls[i][k], 0.0);
                EXPECT_LE(lb[i][k], 1.0);
                EXPECT_LE(ls[i][k], lb[i][k] + 1e-15);
            }
    }
}

TEST(Pyramid, IncompatibleSizeNamesLevel) {
    const PyramidSpec spec{{{4, 2, 1}, {4, 2, 1}, {4, 2, 1}}};
    try {
        mask_pyramid<double>(Mask(4, 4, MaskDomain::projection), spec);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("level 2"), std::string::npos) << e.what();
    }
}
