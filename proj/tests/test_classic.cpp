#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "mar/classic/li.hpp"
#include "mar/classic/nmar.hpp"
#include "mar/ct/fbp.hpp"
#include "mar/ct/phantom.hpp"
#include "mar/ct/simulate.hpp"

using namespace mar;
using namespace mar::classic;
using mar::ct::Sinogram;

namespace {

Mask trace_of(std::size_t views, std::size_t dets, std::initializer_list<std::pair<std::size_t, std::size_t>> cells) {
    Mask m(dets, views, MaskDomain::trace);
    for (auto [v, d] : cells) m.at(v, d) = 1;
    return m;
}

// Random interior runs: never touch detector 0 or the last bin.
Mask random_interior_trace(std::size_t views, std::size_t dets, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Mask m(dets, views, MaskDomain::trace);
    for (std::size_t v = 0; v < views; ++v) {
        std::uniform_int_distribution<std::size_t> start(1, dets - 6), len(1, 4);
        for (int runs = 0; runs < 2; ++runs) {
            const auto s = start(rng), l = len(rng);
            for (std::size_t d = s; d < std::min(s + l, dets - 1); ++d) m.at(v, d) = 1;
        }
    }
    return m;
}

ct::ScanGeometry geom(std::size_t views, std::size_t dets, double spacing) {
    ct::ScanGeometry g;
    g.n_views = views;
    g.n_detectors = dets;
    g.detector_spacing = spacing;
    return g;
}

}  // namespace

TEST(Li, EmptyTraceIsIdentity) {
    Sinogram s(3, 5);
    for (std::size_t i = 0; i < s.values.size(); ++i) s.values[i] = std::sin(static_cast<double>(i));
    auto out = li_complete(s, Mask(5, 3, MaskDomain::trace));
    EXPECT_EQ(out.sinogram.values, s.values);
    EXPECT_FALSE(out.flagged);
}

TEST(Li, RecoversLinearRow) {
    Sinogram s(1, 5);
    s.values = {0, 1, 2, 3, 4};
    auto out = li_complete(s, trace_of(1, 5, {{0, 1}, {0, 2}, {0, 3}}));
    EXPECT_EQ(out.sinogram.values, (std::vector<double>{0, 1, 2, 3, 4}));
}

TEST(Li, FillsGapByClosedForm) {
    Sinogram s(1, 5);
    s.values = {0, -7, 99, 1e6, 8};
    auto out = li_complete(s, trace_of(1, 5, {{0, 1}, {0, 2}, {0, 3}}));
    EXPECT_EQ(out.sinogram.values, (std::vector<double>{0, 2, 4, 6, 8}));
}

TEST(Li, EdgeRunsExtendConstantly) {
    Sinogram s(1, 6);
    s.values = {9, 9, 3, 4, 9, 9};
    auto out = li_complete(s, trace_of(1, 6, {{0, 0}, {0, 1}, {0, 4}, {0, 5}}));
    EXPECT_EQ(out.sinogram.values, (std::vector<double>{3, 3, 3, 4, 4, 4}));
}

TEST(Li, FullyTracedRowFallsBackToNearestView) {
    Sinogram s(3, 3);
    s.values = {1, 2, 3, 0, 0, 0, 7, 8, 9};
    auto out = li_complete(s, trace_of(3, 3, {{1, 0}, {1, 1}, {1, 2}}));
    EXPECT_TRUE(out.flagged);
    EXPECT_EQ(out.sinogram.at(1, 0), 1.0);
    EXPECT_EQ(out.sinogram.at(1, 2), 3.0);
}

TEST(Li, AffineRowsExactIdentityOffTraceAndIdempotent) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-3, 3);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Sinogram s(16, 40);
        for (std::size_t v = 0; v < 16; ++v) {
            const double a = u(rng), b = u(rng);
            for (std::size_t d = 0; d < 40; ++d) s.at(v, d) = a + b * static_cast<double>(d);
        }
        auto trace = random_interior_trace(16, 40, seed);
        auto once = li_complete(s, trace);
        for (std::size_t i = 0; i < s.values.size(); ++i) {
            EXPECT_LT(std::abs(once.sinogram.values[i] - s.values[i]), 1e-12);
            if (!trace.values[i]) EXPECT_EQ(once.sinogram.values[i], s.values[i]);
        }
        auto twice = li_complete(once.sinogram, trace);
        EXPECT_EQ(twice.sinogram.values, once.sinogram.values);
    }
}

TEST(Li, ShapeMismatchIsUsageError) {
    EXPECT_THROW(li_complete(Sinogram(3, 4), Mask(3, 4, MaskDomain::trace)), UsageError);
}

TEST(SegmentPrior, UniformImages) {
    ct::Image water(8, 8, 1.0, 0.0), air(8, 8, 1.0, -1000.0);
    for (double v : segment_prior(water).values) EXPECT_EQ(v, 0.0);
    for (double v : segment_prior(air).values) EXPECT_EQ(v, -1000.0);
}

TEST(SegmentPrior, PiecewiseConstantOutsideBone) {
    ct::Image img(5, 1, 1.0);
    img.values = {-900, -20, 45, 800, 3100};
    auto prior = segment_prior(img);
    EXPECT_EQ(prior.values, (std::vector<double>{-1000, 0, 0, 800, 0}));
    SegmentationThresholds th;
    std::set<double> outside_bone;
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-1100, 4000);
    ct::Image noisy(32, 32, 1.0);
    for (auto& v : noisy.values) v = u(rng);
    auto p = segment_prior(noisy, th);
    for (std::size_t i = 0; i < p.values.size(); ++i)
        if (!(noisy.values[i] >= th.soft_bone && noisy.values[i] < th.metal)) outside_bone.insert(p.values[i]);
    EXPECT_LE(outside_bone.size(), 2u);
    EXPECT_THROW(segment_prior(img, SegmentationThresholds{0, 0, 10}), ConfigError);
}

TEST(Nmar, EmptyTraceIsIdentity) {
    auto g = geom(24, 40, 2.0);
    ct::PhantomSpec spec{{ct::Ellipse{0, 0, 25, 20, 0, 0.02}}, {}};
    auto img = ct::render_phantom(spec, 32, 32, 2.0);
    auto sino = ct::radon(img, g);
    auto out = nmar_complete(sino, Mask(40, 24, MaskDomain::trace), ct::mu_to_hu(img), {}, g);
    EXPECT_EQ(out.sinogram.values, sino.values);
}

TEST(Nmar, PerfectPriorIsRecoveredInsideTrace) {
    const std::size_t n = 64;
    const double ps = 2.0;
    auto g = geom(90, 80, 2.0);
    // Object that already is its own segmentation: air, water, one bone value.
    ct::PhantomSpec spec{{ct::Ellipse{0, 0, 50, 40, 0.1, ct::kMuWater}, ct::Ellipse{-14, 4, 10, 8, 0, 0.6 * ct::kMuWater}},
                         {{ct::Ellipse{12, -5, 4, 3, 0.5, 0}, "iron"}}};
    auto truth = ct::render_phantom(spec, n, n, ps);
    auto truth_hu = ct::mu_to_hu(truth);
    ASSERT_EQ(segment_prior(truth_hu).values, truth_hu.values);
    auto clean = ct::radon(truth, g);
    auto trace = ct::metal_trace(ct::render_metal_mask(spec, n, n, ps), ps, g);
    ASSERT_FALSE(trace.empty());
    Sinogram corrupted = clean;
    for (std::size_t i = 0; i < clean.values.size(); ++i)
        if (trace.values[i]) corrupted.values[i] = 50.0;
    auto out = nmar_complete(corrupted, trace, truth_hu, {}, g);
    for (std::size_t i = 0; i < clean.values.size(); ++i) {
        if (trace.values[i]) {
            if (clean.values[i] > 1e-3) EXPECT_LT(std::abs(out.sinogram.values[i] - clean.values[i]) / clean.values[i], 1e-6);
        } else {
            EXPECT_EQ(out.sinogram.values[i], corrupted.values[i]);
        }
    }
}

TEST(Nmar, HomogeneousInJointScaling) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.5, 2.0);
    Sinogram s(10, 30), prior(10, 30);
    for (std::size_t i = 0; i < s.values.size(); ++i) {
        s.values[i] = u(rng);
        prior.values[i] = u(rng);
    }
    auto trace = random_interior_trace(10, 30, 4);
    const double c = 3.7;
    Sinogram cs = s, cp = prior;
    for (auto& v : cs.values) v *= c;
    for (auto& v : cp.values) v *= c;
    auto a = nmar_complete_with_prior(s, trace, prior);
    auto b = nmar_complete_with_prior(cs, trace, cp);
    for (std::size_t i = 0; i < s.values.size(); ++i)
        EXPECT_NEAR(b.sinogram.values[i], c * a.sinogram.values[i], 1e-12 * c * std::abs(a.sinogram.values[i]) + 1e-15);
}

TEST(Nmar, GuardFlagWhenPriorVanishesOnTrace) {
    Sinogram s(2, 6, 1.0), prior(2, 6, 0.0);
    prior.at(0, 0) = 1.0;
    auto trace = trace_of(2, 6, {{0, 2}, {0, 3}, {1, 2}});
    EXPECT_TRUE(nmar_complete_with_prior(s, trace, prior).flagged);
}

TEST(Baselines, ReduceMetalArtifactsOnSimulatedScan) {
    const std::size_t n = 64;
    const double ps = 2.0;
    auto g = geom(120, 70, 2.0);
    ct::PhantomSpec spec{{ct::Ellipse{0, 0, 50, 40, 0.1, 0.020}, ct::Ellipse{-14, 4, 13, 11, 0.0, 0.025},
                          ct::Ellipse{-14, 4, 7, 6, 0.0, -0.022}},
                         {{ct::Ellipse{15, -4, 4, 3, 0.5, 0}, "iron"}}};
    auto img = ct::render_phantom(spec, n, n, ps);
    auto metal = ct::render_metal_mask(spec, n, n, ps);
    auto phys = ct::PhysicsModel::two_bin_iron();
    auto corrupted = ct::simulate_metal_sinogram(img, metal, g, phys, 2e7, 1);
    auto clean = ct::simulate_metal_sinogram(img, Mask(n, n, MaskDomain::image), g, phys, 2e7, 1);
    auto trace = ct::metal_trace(metal, ps, g);
    auto ref = ct::mu_to_hu(ct::fbp(clean, g, n, ps).image);
    auto rmse = [&](const Sinogram& s) {
        auto rec = ct::mu_to_hu(ct::fbp(s, g, n, ps).image);
        double se = 0;
        std::size_t cnt = 0;
        for (std::size_t i = 0; i < rec.values.size(); ++i)
            if (!metal.values[i]) {
                se += (rec.values[i] - ref.values[i]) * (rec.values[i] - ref.values[i]);
                ++cnt;
            }
        return std::sqrt(se / cnt);
    };
    auto uncorrected = ct::mu_to_hu(ct::fbp(corrupted, g, n, ps).image);
    const double e_in = rmse(corrupted);
    const double e_li = rmse(li_complete(corrupted, trace).sinogram);
    const double e_nmar = rmse(nmar_complete(corrupted, trace, uncorrected, {}, g).sinogram);
    RecordProperty("rmse_input", std::to_string(e_in));
    RecordProperty("rmse_li", std::to_string(e_li));
    RecordProperty("rmse_nmar", std::to_string(e_nmar));
    EXPECT_LT(e_li, e_in);
    EXPECT_LT(e_nmar, e_in);
}
