#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "mar/ct/fbp.hpp"
#include "mar/ct/hu.hpp"
#include "mar/ct/phantom.hpp"
#include "mar/ct/projector.hpp"
#include "mar/ct/simulate.hpp"

using namespace mar;
using namespace mar::ct;

namespace {

PhantomSpec disk(double r, double mu = 1.0, double cx = 0.0, double cy = 0.0) {
    return PhantomSpec{{Ellipse{cx, cy, r, r, 0.0, mu}}, {}};
}

ScanGeometry parallel(std::size_t views, std::size_t dets, double spacing = 1.0) {
    ScanGeometry g;
    g.n_views = views;
    g.n_detectors = dets;
    g.detector_spacing = spacing;
    g.beam = Beam::parallel;
    return g;
}

// Smooth-ish limb phantom: body, two bones with marrow, fat layer.
PhantomSpec limb() {
    return PhantomSpec{{Ellipse{0, 0, 50, 40, 0.1, 0.020},
                        Ellipse{-14, 4, 13, 11, 0.0, 0.025},
                        Ellipse{-14, 4, 7, 6, 0.0, -0.022},
                        Ellipse{20, -6, 7, 6, 0.3, 0.022},
                        Ellipse{8, 18, 10, 5, 0.7, -0.004}},
                       {}};
}

}  // namespace

TEST(Phantom, EmptySpecRendersZero) {
    auto img = render_phantom(PhantomSpec{}, 16, 16, 1.0);
    for (double v : img.values) EXPECT_EQ(v, 0.0);
}

TEST(Phantom, CentredDiskAndOverlap) {
    auto img = render_phantom(disk(5.0, 0.7), 33, 33, 1.0);
    EXPECT_DOUBLE_EQ(img.at(16, 16), 0.7);
    EXPECT_EQ(img.at(0, 0), 0.0);

    PhantomSpec two{{Ellipse{-2, 0, 6, 4, 0, 0.3}, Ellipse{2, 0, 6, 4, 0.5, 0.5}}, {}};
    auto both = render_phantom(two, 32, 32, 1.0);
    bool saw_overlap = false;
    for (std::size_t r = 0; r < 32; ++r)
        for (std::size_t c = 0; c < 32; ++c) {
            const double x = both.x_of(c), y = both.y_of(r);
            const bool a = two.ellipses[0].contains(x, y), b = two.ellipses[1].contains(x, y);
            EXPECT_DOUBLE_EQ(both.at(r, c), (a ? 0.3 : 0.0) + (b ? 0.5 : 0.0));
            saw_overlap = saw_overlap || (a && b);
        }
    EXPECT_TRUE(saw_overlap);
}

TEST(Phantom, OutsideFovIsConfigError) {
    EXPECT_THROW(render_phantom(disk(10.0, 1.0, 30.0), 64, 64, 1.0), ConfigError);
}

TEST(Phantom, ParsesNamedSections) {
    auto spec = parse_phantom(
        "[ellipse.body]\nsemi_a = 50\nsemi_b = 40\nmu = 0.02\n"
        "[ellipse.bone]\ncenter_x = -10\nsemi_a = 8\nmu = 0.03\n"
        "[metal.screw]\ncenter_x = 4\ncenter_y = 2\nsemi_a = 2\nsemi_b = 6\nangle = 0.3\nmaterial = iron\n");
    ASSERT_EQ(spec.ellipses.size(), 2u);
    EXPECT_EQ(spec.ellipses[0].semi_b, 40.0);
    EXPECT_EQ(spec.ellipses[1].semi_b, 8.0);
    EXPECT_EQ(spec.ellipses[1].center_x, -10.0);
    ASSERT_EQ(spec.metals.size(), 1u);
    EXPECT_EQ(spec.metals[0].material, "iron");
    EXPECT_DOUBLE_EQ(spec.metals[0].shape.angle, 0.3);
    auto mask = render_metal_mask(spec, 128, 128, 1.0);
    EXPECT_GT(mask.count(), 20u);
    EXPECT_THROW(parse_phantom("[ellipse.x]\nmu = 1\n"), ConfigError);
}

TEST(Radon, ZeroImageZeroSinogram) {
    auto s = radon(Image(32, 32, 1.0), parallel(12, 40));
    for (double v : s.values) EXPECT_EQ(v, 0.0);
}

TEST(Radon, CentredDiskMatchesChordLength) {
    const double r = 20.0, ps = 1.0;
    auto img = render_phantom(disk(r), 64, 64, ps);
    auto geom = parallel(36, 80, 1.0);
    auto sino = radon(img, geom);
    double worst = 0.0;
    for (std::size_t v = 0; v < geom.n_views; ++v)
        for (std::size_t d = 0; d < geom.n_detectors; ++d) {
            const double u = geom.detector_u(d);
            const double chord = std::abs(u) < r ? 2.0 * std::sqrt(r * r - u * u) : 0.0;
            worst = std::max(worst, std::abs(sino.at(v, d) - chord));
        }
    EXPECT_LT(worst, 1.5 * ps);
}

TEST(Radon, CentredDiskIsViewInvariantOnGridSymmetricAngles) {
    // Views at multiples of 90 degrees map the pixel grid onto itself.
    auto img = render_phantom(disk(11.0), 48, 48, 0.5);
    auto sino = radon(img, parallel(4, 64, 0.5));
    for (std::size_t v = 1; v < 4; ++v)
        for (std::size_t d = 0; d < 64; ++d) EXPECT_NEAR(sino.at(v, d), sino.at(0, d), 1e-9);
}

TEST(Radon, Linearity) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0, 1);
    Image a(24, 24, 1.0), b(24, 24, 1.0), c(24, 24, 1.0);
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        a.values[i] = u(rng);
        b.values[i] = u(rng);
        c.values[i] = 2.5 * a.values[i] - 0.75 * b.values[i];
    }
    auto geom = parallel(17, 35, 0.9);
    auto sa = radon(a, geom), sb = radon(b, geom), sc = radon(c, geom);
    for (std::size_t i = 0; i < sa.values.size(); ++i) EXPECT_NEAR(sc.values[i], 2.5 * sa.values[i] - 0.75 * sb.values[i], 1e-9);
}

TEST(Radon, MassConservationPerView) {
    auto img = render_phantom(limb(), 128, 128, 1.0);
    double mass = 0.0;
    for (double v : img.values) mass += v;
    auto geom = parallel(60, 190, 1.0);
    auto sino = radon(img, geom);
    for (std::size_t v = 0; v < geom.n_views; ++v) {
        double s = 0.0;
        for (std::size_t d = 0; d < geom.n_detectors; ++d) s += sino.at(v, d) * geom.detector_spacing;
        EXPECT_LT(std::abs(s - mass) / mass, 0.01) << "view " << v;
    }
}

TEST(Radon, FanBeamSourceInsideImageIsConfigError) {
    ScanGeometry g = parallel(8, 16);
    g.beam = Beam::fan;
    g.source_to_center = 10.0;
    EXPECT_THROW(radon(Image(64, 64, 1.0), g), ConfigError);
}

TEST(Fbp, ZeroSinogramGivesZeroImage) {
    auto geom = parallel(30, 40);
    auto res = fbp(Sinogram(30, 40), geom, 32, 1.0);
    for (double v : res.image.values) EXPECT_EQ(v, 0.0);
    EXPECT_FALSE(res.degraded);
    EXPECT_TRUE(fbp(Sinogram(4, 40), parallel(4, 40), 32, 1.0).degraded);
}

TEST(Fbp, Linearity) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-1, 1);
    auto geom = parallel(20, 30);
    Sinogram a(20, 30), b(20, 30), c(20, 30);
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        a.values[i] = u(rng);
        b.values[i] = u(rng);
        c.values[i] = -1.5 * a.values[i] + 3.0 * b.values[i];
    }
    for (auto window : {FilterWindow::ram_lak, FilterWindow::cosine}) {
        auto fa = fbp(a, geom, 24, 1.0, {window}).image, fb = fbp(b, geom, 24, 1.0, {window}).image,
             fc = fbp(c, geom, 24, 1.0, {window}).image;
        for (std::size_t i = 0; i < fa.values.size(); ++i)
            EXPECT_NEAR(fc.values[i], -1.5 * fa.values[i] + 3.0 * fb.values[i], 1e-9);
    }
}

namespace {

double relative_rmse_in_circle(const Image& rec, const Image& truth) {
    double lo = 1e300, hi = -1e300;
    for (double v : truth.values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const double radius = 0.5 * truth.width * truth.pixel_size;
    double se = 0.0;
    std::size_t n = 0;
    for (std::size_t r = 0; r < truth.height; ++r)
        for (std::size_t c = 0; c < truth.width; ++c) {
            if (std::hypot(truth.x_of(c), truth.y_of(r)) > radius) continue;
            const double e = rec.at(r, c) - truth.at(r, c);
            se += e * e;
            ++n;
        }
    return std::sqrt(se / static_cast<double>(n)) / (hi - lo);
}

}  // namespace

TEST(Fbp, ParallelRoundTripOnLimbPhantom) {
    auto truth = render_phantom(limb(), 128, 128, 1.0);
    auto geom = parallel(180, 185, 1.0);
    auto rec = fbp(radon(truth, geom), geom, 128, 1.0).image;
    EXPECT_LT(relative_rmse_in_circle(rec, truth), 0.05);
    auto rec_cos = fbp(radon(truth, geom), geom, 128, 1.0, {FilterWindow::cosine}).image;
    EXPECT_LT(relative_rmse_in_circle(rec_cos, truth), 0.05);
}

TEST(Fbp, HalfScanRangeAlsoReconstructs) {
    auto truth = render_phantom(limb(), 128, 128, 1.0);
    auto geom = parallel(180, 185, 1.0);
    geom.angular_range = std::numbers::pi;
    auto rec = fbp(radon(truth, geom), geom, 128, 1.0).image;
    EXPECT_LT(relative_rmse_in_circle(rec, truth), 0.05);
}

TEST(Fbp, FanBeamRoundTrip) {
    auto truth = render_phantom(limb(), 128, 128, 1.0);
    auto geom = parallel(360, 200, 1.0);
    geom.beam = Beam::fan;
    geom.source_to_center = 300.0;
    auto rec = fbp(radon(truth, geom), geom, 128, 1.0).image;
    EXPECT_LT(relative_rmse_in_circle(rec, truth), 0.05);
}

TEST(Hu, ConversionPoints) {
    Image img(3, 1, 1.0);
    img.values = {kMuWater, 0.0, 0.05};
    auto hu = mu_to_hu(img);
    EXPECT_DOUBLE_EQ(hu.values[0], 0.0);
    EXPECT_DOUBLE_EQ(hu.values[1], -1000.0);
    auto back = hu_to_mu(hu);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(back.values[i], img.values[i], 1e-12);
    EXPECT_THROW(mu_to_hu(img, 0.0), UsageError);
}

TEST(Simulate, NoiselessSingleBinWithoutMetalIsRadon) {
    auto img = render_phantom(limb(), 64, 64, 2.0);
    auto geom = parallel(32, 70, 2.0);
    Mask empty(64, 64, MaskDomain::image);
    auto sim = simulate_metal_sinogram(img, empty, geom, PhysicsModel{}, kNoiseless, 1);
    auto ref = radon(img, geom);
    for (std::size_t i = 0; i < ref.values.size(); ++i) EXPECT_NEAR(sim.values[i], ref.values[i], 1e-9);
}

TEST(Simulate, SeedDeterminismAndErrors) {
    auto spec = limb();
    spec.metals.push_back({Ellipse{-14, 4, 3, 3, 0, 0}, "iron"});
    auto img = render_phantom(spec, 64, 64, 2.0);
    auto metal = render_metal_mask(spec, 64, 64, 2.0);
    auto geom = parallel(24, 70, 2.0);
    auto phys = PhysicsModel::two_bin_iron();
    auto a = simulate_metal_sinogram(img, metal, geom, phys, 2e4, 77);
    auto b = simulate_metal_sinogram(img, metal, geom, phys, 2e4, 77);
    auto c = simulate_metal_sinogram(img, metal, geom, phys, 2e4, 78);
    EXPECT_EQ(a.values, b.values);
    EXPECT_NE(a.values, c.values);
    EXPECT_THROW(simulate_metal_sinogram(img, metal, geom, phys, 0.0, 1), UsageError);
    EXPECT_THROW(simulate_metal_sinogram(img, Mask(8, 8, MaskDomain::image), geom, phys, 1e5, 1), UsageError);
}

TEST(Simulate, PhotonStarvationIsClampedFinite) {
    auto spec = limb();
    spec.metals.push_back({Ellipse{0, 0, 12, 12, 0, 0}, "iron"});
    auto img = render_phantom(spec, 64, 64, 2.0);
    auto metal = render_metal_mask(spec, 64, 64, 2.0);
    PhysicsModel heavy{{{1.0, 1.0, 1.0}}, 5.0};
    auto s = simulate_metal_sinogram(img, metal, parallel(8, 70, 2.0), heavy, 100.0, 3);
    double peak = 0.0;
    for (double v : s.values) {
        ASSERT_TRUE(std::isfinite(v));
        peak = std::max(peak, v);
    }
    EXPECT_NEAR(peak, std::log(100.0), 1e-12);
}

TEST(Simulate, MetalProducesStreaksConcentratedAtMetal) {
    auto spec = limb();
    spec.metals.push_back({Ellipse{-14, 4, 4, 3, 0.4, 0}, "iron"});
    const std::size_t n = 64;
    const double ps = 2.0;
    auto img = render_phantom(spec, n, n, ps);
    auto metal = render_metal_mask(spec, n, n, ps);
    auto geom = parallel(180, 70, 2.0);
    auto corrupted = simulate_metal_sinogram(img, metal, geom, PhysicsModel::two_bin_iron(), 2e7, 5);
    auto clean = simulate_metal_sinogram(img, Mask(n, n, MaskDomain::image), geom, PhysicsModel::two_bin_iron(),
                                         kNoiseless, 5);
    auto diff_a = mu_to_hu(fbp(corrupted, geom, n, ps).image);
    auto diff_b = mu_to_hu(fbp(clean, geom, n, ps).image);
    double se_in = 0, se_out = 0;
    std::size_t n_in = 0, n_out = 0;
    for (std::size_t i = 0; i < diff_a.values.size(); ++i) {
        const double e = diff_a.values[i] - diff_b.values[i];
        (metal.values[i] ? se_in : se_out) += e * e;
        (metal.values[i] ? n_in : n_out) += 1;
    }
    const double rmse_in = std::sqrt(se_in / n_in), rmse_out = std::sqrt(se_out / n_out);
    RecordProperty("streak_ratio", std::to_string(rmse_in / rmse_out));
    EXPECT_GT(rmse_in, rmse_out);
    EXPECT_GT(rmse_out, 1.0);  // streaks reach the background
}

TEST(MetalTrace, EmptyAndFull) {
    auto geom = parallel(16, 20, 1.0);
    EXPECT_TRUE(metal_trace(Mask(32, 32, MaskDomain::image), 1.0, geom).empty());
    auto full = metal_trace(Mask(32, 32, MaskDomain::image, 1), 1.0, geom);
    EXPECT_EQ(full.count(), full.values.size());
    EXPECT_EQ(full.domain, MaskDomain::trace);
}

TEST(MetalTrace, CentredDiskGivesConstantBand) {
    const double r = 6.0;
    auto metal = render_metal_mask(PhantomSpec{{}, {{Ellipse{0, 0, r, r, 0, 0}, "iron"}}}, 64, 64, 1.0);
    auto geom = parallel(90, 80, 1.0);
    auto trace = metal_trace(metal, 1.0, geom);
    for (std::size_t v = 0; v < geom.n_views; ++v) {
        std::size_t width = 0, first = geom.n_detectors, last = 0;
        for (std::size_t d = 0; d < geom.n_detectors; ++d)
            if (trace.at(v, d)) {
                ++width;
                first = std::min(first, d);
                last = d;
            }
        EXPECT_EQ(width, last - first + 1) << "band must be contiguous";
        EXPECT_NEAR(static_cast<double>(width), 2.0 * r / geom.detector_spacing, 2.0) << "view " << v;
    }
}

TEST(MetalTrace, MonotoneInMask) {
    auto geom = parallel(40, 50, 1.0);
    auto a = render_metal_mask(PhantomSpec{{}, {{Ellipse{-5, 3, 3, 2, 0.2, 0}, "iron"}}}, 40, 40, 1.0);
    auto b = render_metal_mask(PhantomSpec{{}, {{Ellipse{8, -6, 2, 4, 0.9, 0}, "iron"}}}, 40, 40, 1.0);
    auto ta = metal_trace(a, 1.0, geom);
    auto tab = metal_trace(mask_union(a, b), 1.0, geom);
    EXPECT_TRUE(tab.contains(ta));
}
