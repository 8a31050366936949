#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "mar/classic/li.hpp"
#include "mar/ct/fbp.hpp"
#include "mar/ct/hu.hpp"
#include "mar/ct/phantom.hpp"
#include "mar/ct/stack.hpp"
#include "mar/eval/config.hpp"
#include "mar/eval/dataset.hpp"
#include "mar/eval/experiment.hpp"
#include "mar/eval/metrics.hpp"
#include "mar/eval/pipeline.hpp"
#include "mar/gan/infer.hpp"

using namespace mar;
using namespace mar::eval;
namespace fs = std::filesystem;

namespace {

ct::Image ramp_image(std::size_t n) {
    ct::Image img(n, n, 1.0);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) img.at(r, c) = 10.0 * static_cast<double>(r) - 3.0 * static_cast<double>(c);
    return img;
}

// Small enough to build, train and evaluate in seconds.
ExperimentConfig tiny_config() {
    std::istringstream in(R"(
[geometry]
views = 32
detectors = 32
detector_spacing = 2
beam = fan
source_to_center = 200
[volume]
size = 32
slices = 16
[dataset]
train_phantoms = 3
test_phantoms = 2
train_samples = 12
sc_samples = 6
test_cases = 4
shard_size = 5
[generator]
widths = 4, 8
[discriminator]
widths = 4, 8
[training]
iterations_pc = 3
iterations_sc = 2
batch = 4
[eval]
panels = 2
)");
    return parse_experiment_config(in);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("mar_test_eval_" + name);
    fs::remove_all(p);
    return p;
}

}  // namespace

TEST(Metrics, RmseIdentityAndOffset) {
    const auto a = ramp_image(16);
    EXPECT_EQ(rmse(a, a), 0.0);
    auto b = a;
    for (auto& v : b.values) v += 10.0;
    EXPECT_NEAR(rmse(a, b), 10.0, 1e-12);
    Mask region(16, 16, MaskDomain::image);
    region.at(3, 4) = 1;
    b.at(3, 4) += 5.0;
    EXPECT_NEAR(rmse(a, b, region), 15.0, 1e-12);
    EXPECT_THROW(rmse(a, b, Mask(16, 16, MaskDomain::image)), UsageError);
}

TEST(Metrics, RmseOutsideMetalIgnoresReinsertedValue) {
    const auto a = ramp_image(16);
    auto b = a;
    b.values[0] += 2.0;
    Mask metal(16, 16, MaskDomain::image);
    metal.at(8, 8) = metal.at(8, 9) = 1;
    const double base = rmse_outside_metal(a, b, metal);
    for (double v : {0.0, 3000.0, -1000.0})
        EXPECT_EQ(rmse_outside_metal(reinsert_metal(a, metal, v), reinsert_metal(b, metal, 7.0 * v), metal), base);
}

TEST(Metrics, SsimProperties) {
    const auto a = ramp_image(24);
    EXPECT_NEAR(ssim(a, a), 1.0, 1e-9);
    ct::Image c1(24, 24, 1.0, 50.0), c2 = c1;
    EXPECT_NEAR(ssim(c1, c2), 1.0, 1e-9);
    auto inv = a;
    for (auto& v : inv.values) v = -v;
    auto noisy = a;
    for (std::size_t i = 0; i < noisy.values.size(); ++i) noisy.values[i] += (i % 3 == 0 ? 20.0 : -10.0);
    const double s_inv = ssim(a, inv), s_noisy = ssim(a, noisy);
    EXPECT_LT(s_inv, s_noisy);
    EXPECT_LT(s_noisy, 1.0);
    EXPECT_GE(s_inv, -1.0);
    EXPECT_NEAR(ssim(a, noisy), ssim(noisy, a), 1e-12);
    SsimParams even;
    even.window = 10;
    EXPECT_THROW(ssim(a, a, even), UsageError);
    ct::Image small(8, 8, 1.0);
    EXPECT_THROW(ssim(small, small), UsageError);
}

TEST(Metrics, TraceRmseOfLiOnAffineViews) {
    // Each view is affine in the detector index, so LI restores it exactly.
    ct::Sinogram truth(12, 40);
    for (std::size_t v = 0; v < 12; ++v)
        for (std::size_t d = 0; d < 40; ++d) truth.at(v, d) = 0.3 * static_cast<double>(v) + 0.01 * static_cast<double>(v + 1) * d;
    Mask trace(40, 12, MaskDomain::trace);
    for (std::size_t v = 0; v < 12; ++v)
        for (std::size_t d = 10 + v; d < 18 + v; ++d) trace.at(v, d) = 1;
    auto corrupted = truth;
    for (std::size_t i = 0; i < corrupted.values.size(); ++i)
        if (trace.values[i]) corrupted.values[i] = 9.0;
    EXPECT_GT(rmse(corrupted, truth, trace), 1.0);
    EXPECT_LT(rmse(classic::li_complete(corrupted, trace).sinogram, truth, trace), 1e-12);
}

TEST(Experiment, ParallelForRethrowsFirstError) {
    std::vector<int> hit(20, 0);
    eval::detail::parallel_for(20, 4, [&](std::size_t i) { hit[i] += 1; });
    for (int h : hit) EXPECT_EQ(h, 1);
    try {
        eval::detail::parallel_for(20, 4, [](std::size_t i) {
            if (i == 7 || i == 12) throw NumericalError("case " + std::to_string(i));
        });
        FAIL();
    } catch (const NumericalError& e) {
        EXPECT_STREQ(e.what(), "case 7");
    }
}

TEST(Stack, ProjectionIsTransposeOfViews) {
    ct::SinogramStack stack(3, ct::Sinogram(4, 5));
    for (std::size_t z = 0; z < 3; ++z)
        for (std::size_t v = 0; v < 4; ++v)
            for (std::size_t d = 0; d < 5; ++d) stack[z].at(v, d) = 100.0 * z + 10.0 * v + d;
    const auto p = ct::projection_of(stack, 2);
    ASSERT_EQ(p.size(), 15u);
    for (std::size_t z = 0; z < 3; ++z)
        for (std::size_t d = 0; d < 5; ++d) EXPECT_EQ(p[z * 5 + d], 100.0 * z + 20.0 + d);
    std::vector<Mask> traces(3, Mask(5, 4, MaskDomain::trace));
    traces[1].at(2, 3) = 1;
    const auto pm = ct::projection_mask_of(traces, 2);
    EXPECT_EQ(pm.count(), 1u);
    EXPECT_EQ(pm.at(1, 3), 1);
    EXPECT_TRUE(ct::projection_mask_of(traces, 1).empty());
    stack[1] = ct::Sinogram(4, 6);
    EXPECT_THROW(ct::require_stack(stack), UsageError);
}

TEST(Config, DefaultsValidateAndParse) {
    ExperimentConfig c;
    EXPECT_NO_THROW(c.validate());
    std::istringstream empty("");
    const auto p = parse_experiment_config(empty);
    EXPECT_EQ(p.gen_widths, c.gen_widths);
    EXPECT_EQ(p.methods, known_methods());

    const auto t = tiny_config();
    EXPECT_EQ(t.geometry.n_views, 32u);
    EXPECT_EQ(t.grid.slices, 16u);
    EXPECT_EQ(t.gen_widths, (std::vector<std::size_t>{4, 8}));
    EXPECT_EQ(t.iterations_pc, 3u);
}

TEST(Config, RejectsBadInput) {
    auto parse = [](const std::string& s) {
        std::istringstream in(s);
        return parse_experiment_config(in);
    };
    EXPECT_THROW(parse("[nope]\nx = 1\n"), ConfigError);
    EXPECT_THROW(parse("[training]\nlearning_rate = 1\n"), ConfigError);
    EXPECT_THROW(parse("[training]\nbatch = -4\n"), ConfigError);
    EXPECT_THROW(parse("[training]\nbatch = four\n"), ConfigError);
    EXPECT_THROW(parse("[training]\nlr = 0\n"), ConfigError);
    EXPECT_THROW(parse("[geometry]\nbeam = cone\n"), ConfigError);
    EXPECT_THROW(parse("[methods]\nlist = input, magic\n"), ConfigError);
    EXPECT_THROW(parse("[bins]\nedges = 10, 5\n"), ConfigError);
    EXPECT_THROW(parse("[volume]\nslices = 30\n"), ConfigError);  // not restored by four stride-2 blocks
    EXPECT_THROW(parse("[generator]\nmpn = maybe\n"), ConfigError);
    EXPECT_THROW(load_experiment_config("/nonexistent/config.ini"), ConfigError);
}

TEST(Config, SizeBins) {
    SizeBins b;
    EXPECT_EQ(b.count(), 5u);
    EXPECT_EQ(b.index(0), 0u);
    EXPECT_EQ(b.index(199), 0u);
    EXPECT_EQ(b.index(200), 1u);
    EXPECT_EQ(b.index(5000), 4u);
    EXPECT_EQ(b.label(0), "<200");
    EXPECT_EQ(b.label(1), "200-500");
    EXPECT_EQ(b.label(4), ">2000");
}

TEST(Dataset, ScSplitKeepsValidationPhantomsOut) {
    ExperimentConfig c;
    DatasetManifest m;
    for (std::uint64_t i = 0; i < 40; ++i) m.train_ids.push_back(i);
    const auto [train, held] = sc_split(c, m);
    EXPECT_EQ(train.size(), 32u);
    EXPECT_EQ(held.size(), 8u);
    for (auto id : held) EXPECT_EQ(std::count(train.begin(), train.end(), id), 0);
    m.train_ids = {0, 1, 2};
    EXPECT_TRUE(sc_split(c, m).second.empty());
    c.sc_holdout = 0.9;
    EXPECT_EQ(sc_split(c, m).first.size(), 1u);
}

TEST(Dataset, SplitSamplesAndDeterminism) {
    const auto c = tiny_config();
    const auto d1 = scratch("ds1"), d2 = scratch("ds2");
    const auto m = build_dataset(c, d1);
    build_dataset(c, d2);
    EXPECT_FALSE(fs::exists(d1.string() + ".partial"));

    std::set<std::uint64_t> train(m.train_ids.begin(), m.train_ids.end());
    for (auto id : m.test_ids) EXPECT_EQ(train.count(id), 0u);
    for (const auto& t : load_test_cases(d1)) EXPECT_EQ(train.count(t.phantom), 0u);

    const auto samples = load_train_samples(d1);
    ASSERT_EQ(samples.size(), c.train_samples);
    EXPECT_EQ(m.shards, 3u);
    for (const auto& s : samples) {
        EXPECT_NO_THROW(s.validate());
        EXPECT_FALSE(s.s.empty());
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (s.s.values[i]) EXPECT_EQ(s.x[i], 0.0f);
            EXPECT_GE(s.y[i], -1.0f);
            EXPECT_LE(s.y[i], 1.0f);
        }
    }
    for (const auto& e : fs::directory_iterator(d1))
        EXPECT_EQ(slurp(e.path()), slurp(d2 / e.path().filename())) << e.path().filename();
    EXPECT_EQ(load_manifest(d2).norm.lo, m.norm.lo);
    EXPECT_THROW(load_manifest(scratch("missing")), ConfigError);
}

TEST(Infer, EmptyTraceLeavesSinogramsAndMatchesFbp) {
    const auto c = tiny_config();
    const auto scan = clean_scan(c, 0);
    const std::vector<Mask> traces(scan.size(), Mask(c.geometry.n_detectors, c.geometry.n_views, MaskDomain::trace));
    const auto pc = gan::ModelBundle::initialize(gan::Stage::pc, c.generator(), c.discriminator(), {-1.0, 5.0}, 3);
    const auto sc = gan::ModelBundle::initialize(gan::Stage::sc, c.generator(), c.discriminator(), {-1.0, 5.0}, 4);
    gan::InferOptions opts;
    opts.out_size = c.grid.size;
    opts.recon_slices = {5};
    const auto res = gan::infer_mar(scan, traces, pc, &sc, c.geometry, opts);
    for (std::size_t z = 0; z < scan.size(); ++z) EXPECT_EQ(res.sinograms[z].values, scan[z].values);
    ASSERT_EQ(res.images.size(), 1u);
    const auto direct = ct::mu_to_hu(ct::fbp(scan[5], c.geometry, c.grid.size, c.grid.pixel_size).image);
    EXPECT_EQ(res.images[0].values, direct.values);
    EXPECT_THROW(gan::infer_mar(scan, traces, sc, nullptr, c.geometry, opts), UsageError);
}

TEST(Infer, OffTraceValuesAreExact) {
    const auto c = tiny_config();
    const auto scan = clean_scan(c, 1);
    const auto library = c.library();
    auto metal = random_metal(7, 0, library, c.grid);
    const auto traces = metal_traces(metal_masks(metal, library, c.grid), c.grid.pixel_size, c.geometry);
    const auto pc = gan::ModelBundle::initialize(gan::Stage::pc, c.generator(), c.discriminator(), {-1.0, 5.0}, 3);
    gan::InferOptions opts;
    opts.reconstruct = false;
    const auto res = gan::infer_mar(scan, traces, pc, nullptr, c.geometry, opts);
    std::size_t changed = 0;
    for (std::size_t z = 0; z < scan.size(); ++z)
        for (std::size_t i = 0; i < scan[z].values.size(); ++i) {
            if (!traces[z].values[i]) EXPECT_EQ(res.sinograms[z].values[i], scan[z].values[i]);
            else changed += res.sinograms[z].values[i] != scan[z].values[i];
        }
    EXPECT_GT(changed, 0u);
}

TEST(Experiment, InputWithoutMetalIsPerfect) {
    const auto c = tiny_config();
    const auto library = c.library();
    TestCase tc{0, 3, random_metal(1, 0, library, c.grid)};
    tc.metal.at.row = -1000;  // implant entirely off the grid
    const auto res = evaluate_case(c, tc, clean_scan(c, 3), library, {});
    ASSERT_EQ(res.rows.size(), 3u);  // input, LI, NMAR; no models
    for (const auto& r : res.rows) {
        EXPECT_EQ(r.mask_size, 0u);
        EXPECT_EQ(r.rmse_hu, 0.0) << r.method;
        EXPECT_NEAR(r.ssim, 1.0, 1e-9) << r.method;
        EXPECT_EQ(r.rmse_trace, 0.0);
    }
}

TEST(Experiment, AggregateCoversEveryBinAndMethod) {
    SizeBins bins;
    const std::vector<std::string> methods = {"input", "LI"};
    std::vector<MetricRow> rows = {{0, "input", 100, 4.0, 0.5, 1.0}, {1, "input", 150, 6.0, 0.7, 3.0}, {1, "LI", 150, 2.0, 0.9, 0.5}};
    const auto agg = aggregate(rows, bins, methods);
    ASSERT_EQ(agg.size(), bins.count() * methods.size());
    EXPECT_EQ(agg[0].method, "input");
    EXPECT_EQ(agg[0].rmse_hu.n, 2u);
    EXPECT_DOUBLE_EQ(agg[0].rmse_hu.mean, 5.0);
    EXPECT_DOUBLE_EQ(agg[0].rmse_hu.std, 1.0);
    EXPECT_EQ(agg[2].rmse_hu.n, 0u);
    EXPECT_TRUE(std::isnan(agg[2].rmse_hu.mean));
    MetricRow bad{0, "x", 1, -1.0, 0.5, 0.0};
    EXPECT_THROW(bad.validate(), NumericalError);
    bad = {0, "x", 1, 1.0, 1.5, 0.0};
    EXPECT_THROW(bad.validate(), NumericalError);
}

TEST(Experiment, PipelineWritesDeterministicReports) {
    auto c = tiny_config();
    auto threaded = c;
    c.threads = 1;
    threaded.threads = 3;
    RunPaths a{scratch("run_a")}, b{scratch("run_b")};
    const auto ra = run_pipeline(c, a);
    run_pipeline(threaded, b);
    for (const char* f : {"metrics.csv", "aggregate.csv", "summary.txt", "rmse_vs_size.png", "ssim_vs_size.png", "panels.png"}) {
        ASSERT_TRUE(fs::exists(a.report() / f)) << f;
        EXPECT_EQ(slurp(a.report() / f), slurp(b.report() / f)) << f;
    }
    EXPECT_EQ(ra.report.rows.size(), c.test_cases * known_methods().size());
    EXPECT_TRUE(ra.report.warnings.empty());
    std::ifstream agg(a.report() / "aggregate.csv");
    std::size_t lines = 0;
    for (std::string l; std::getline(agg, l);) ++lines;
    EXPECT_EQ(lines, 1 + c.bins.count() * c.methods.size());

    // Without the SC model the remaining methods still run.
    fs::remove_all(a.sc());
    const auto partial = evaluate_stage(c, a);
    EXPECT_EQ(partial.warnings.size(), 1u);
    EXPECT_EQ(partial.rows.size(), c.test_cases * (known_methods().size() - 1));
}
