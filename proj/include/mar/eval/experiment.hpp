#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "mar/classic/li.hpp"
#include "mar/classic/nmar.hpp"
#include "mar/core/error.hpp"
#include "mar/ct/fbp.hpp"
#include "mar/ct/hu.hpp"
#include "mar/eval/config.hpp"
#include "mar/eval/dataset.hpp"
#include "mar/eval/metrics.hpp"
#include "mar/eval/volume.hpp"
#include "mar/gan/bundle.hpp"
#include "mar/gan/infer.hpp"
#include "mar/io/plot.hpp"
#include "mar/io/png.hpp"
#include "mar/tensor/marf.hpp"

namespace mar::eval {

struct MetricRow {
    std::size_t case_id = 0;
    std::string method;
    std::size_t mask_size = 0;  // traced sinogram bins of the evaluated slice
    double rmse_hu = 0.0;       // image, outside metal
    double ssim = 1.0;          // image, metal reinserted
    double rmse_trace = 0.0;    // sinogram, inside the trace, vs the metal-free scan

    void validate() const {
        if (!std::isfinite(rmse_hu) || rmse_hu < 0.0 || !std::isfinite(rmse_trace) || rmse_trace < 0.0)
            throw NumericalError("metric row " + std::to_string(case_id) + "/" + method + ": RMSE is negative or not finite");
        if (!std::isfinite(ssim) || ssim < -1.0 - 1e-9 || ssim > 1.0 + 1e-9)
            throw NumericalError("metric row " + std::to_string(case_id) + "/" + method + ": SSIM outside [-1, 1]");
    }
};

struct Stat {
    std::size_t n = 0;
    double mean = NAN;
    double std = NAN;
};

struct AggregateRow {
    std::string bin;
    std::string method;
    Stat rmse_hu, ssim, rmse_trace;
};

/// Everything produced for one held-out case.
struct CaseResult {
    std::vector<MetricRow> rows;
    std::vector<std::pair<std::string, ct::Image>> images;  // HU, metal reinserted, including "GT"
};

struct Report {
    std::vector<MetricRow> rows;
    std::vector<AggregateRow> aggregates;
    std::vector<std::string> warnings;
    double seconds = 0.0;
};

/// Trained models available to the evaluation; either may be absent.
struct Models {
    std::optional<gan::ModelBundle> pc;
    std::optional<gan::ModelBundle> sc;
};

inline Stat stat_of(const std::vector<double>& v) {
    Stat s;
    s.n = v.size();
    if (v.empty()) return s;
    double sum = 0.0;
    for (double x : v) sum += x;
    s.mean = sum / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(v.size()));
    return s;
}

/// One row per (bin, method), in bin order then config method order, empty bins included.
inline std::vector<AggregateRow> aggregate(const std::vector<MetricRow>& rows, const SizeBins& bins,
                                           const std::vector<std::string>& methods) {
    std::vector<AggregateRow> out;
    for (std::size_t b = 0; b < bins.count(); ++b)
        for (const auto& m : methods) {
            std::vector<double> r, s, t;
            for (const auto& row : rows)
                if (row.method == m && bins.index(row.mask_size) == b) {
                    r.push_back(row.rmse_hu);
                    s.push_back(row.ssim);
                    t.push_back(row.rmse_trace);
                }
            out.push_back({bins.label(b), m, stat_of(r), stat_of(s), stat_of(t)});
        }
    return out;
}

/**
 * Scores every configured method on one case. The metal-free scan `clean`
 * of the case's phantom is the reference; the corrupted scan shares its
 * noise, so differences come from the implant alone.
 */
inline CaseResult evaluate_case(const ExperimentConfig& c, const TestCase& tc, const ct::SinogramStack& clean,
                                const std::vector<Mask>& library, const Models& models) {
    const auto slices = render_volume(limb_phantom(c.seed, tc.phantom, c.grid), c.grid);
    const auto masks = metal_masks(tc.metal, library, c.grid);
    const auto traces = metal_traces(masks, c.grid.pixel_size, c.geometry);
    ct::SinogramStack corrupted = clean;
    for (std::size_t z = tc.metal.z0; z < std::min(tc.metal.z1, c.grid.slices); ++z)
        corrupted[z] = ct::simulate_metal_sinogram(slices[z], masks[z], c.geometry, c.physics, c.photons,
                                                   derive_seed(c.seed, tc.phantom, z));
    const std::size_t z = tc.metal.middle();
    const Mask& metal = masks[z];
    const Mask& trace = traces[z];
    const std::size_t n = c.grid.size;
    const double ps = c.grid.pixel_size;

    auto recon = [&](const ct::Sinogram& s) { return ct::mu_to_hu(ct::fbp(s, c.geometry, n, ps).image); };
    const auto truth = recon(clean[z]);
    const auto truth_shown = reinsert_metal(truth, metal, c.metal_value);
    const auto uncorrected = recon(corrupted[z]);

    CaseResult res;
    res.images.push_back({"GT", truth_shown});
    auto score = [&](const std::string& method, const ct::Sinogram& sino) {
        const auto img = recon(sino);
        const auto shown = reinsert_metal(img, metal, c.metal_value);
        MetricRow row;
        row.case_id = tc.id;
        row.method = method;
        row.mask_size = trace.count();
        row.rmse_hu = rmse_outside_metal(img, truth, metal);
        row.ssim = ssim(shown, truth_shown);
        row.rmse_trace = row.mask_size == 0 ? 0.0 : rmse(sino, clean[z], trace);
        row.validate();
        res.rows.push_back(row);
        res.images.push_back({method, shown});
    };

    std::optional<gan::InferResult> gan_out;
    if ((c.has_method("PC") && models.pc) || (c.has_method("PC+SC") && models.pc && models.sc)) {
        gan::InferOptions opts;
        opts.reconstruct = false;
        gan_out = gan::infer_mar(corrupted, traces, *models.pc, models.sc ? &*models.sc : nullptr, c.geometry, opts);
    }
    for (const auto& m : c.methods) {
        if (m == "input") score(m, corrupted[z]);
        else if (m == "LI") score(m, classic::li_complete(corrupted[z], trace).sinogram);
        else if (m == "NMAR") score(m, classic::nmar_complete(corrupted[z], trace, uncorrected, {}, c.geometry).sinogram);
        else if (m == "PC" && gan_out) score(m, gan_out->pc_sinograms[z]);
        else if (m == "PC+SC" && gan_out && models.sc) score(m, gan_out->sinograms[z]);
    }
    return res;
}

namespace detail {

/// Runs body(0..n-1) on up to `threads` workers (0: hardware concurrency).
/// The first exception, by index, is rethrown after all workers finish.
inline void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& body) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, n);
    std::vector<std::exception_ptr> errors(n);
    auto run = [&](std::size_t i) {
        try {
            body(i);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) run(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) run(i);
            });
        for (auto& th : pool) th.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

inline std::string fmt(double v) {
    if (!std::isfinite(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

inline std::string metrics_csv(const std::vector<MetricRow>& rows) {
    std::string s = "case,method,mask_size,rmse_hu,ssim,rmse_trace\n";
    for (const auto& r : rows)
        s += std::to_string(r.case_id) + "," + r.method + "," + std::to_string(r.mask_size) + "," + fmt(r.rmse_hu) + "," +
             fmt(r.ssim) + "," + fmt(r.rmse_trace) + "\n";
    return s;
}

inline std::string aggregate_csv(const std::vector<AggregateRow>& rows) {
    std::string s = "bin,method,n,rmse_hu_mean,rmse_hu_std,ssim_mean,ssim_std,rmse_trace_mean,rmse_trace_std\n";
    for (const auto& r : rows)
        s += r.bin + "," + r.method + "," + std::to_string(r.rmse_hu.n) + "," + fmt(r.rmse_hu.mean) + "," +
             fmt(r.rmse_hu.std) + "," + fmt(r.ssim.mean) + "," + fmt(r.ssim.std) + "," + fmt(r.rmse_trace.mean) + "," +
             fmt(r.rmse_trace.std) + "\n";
    return s;
}

inline void write_plots(const std::filesystem::path& out, const std::vector<AggregateRow>& agg, const SizeBins& bins,
                        const std::vector<std::string>& methods) {
    std::vector<std::string> labels;
    for (std::size_t b = 0; b < bins.count(); ++b) labels.push_back(bins.label(b));
    std::vector<io::Series> r, s;
    for (const auto& m : methods) {
        io::Series sr{m, {}}, ss{m, {}};
        for (const auto& a : agg)
            if (a.method == m) {
                sr.y.push_back(a.rmse_hu.mean);
                ss.y.push_back(a.ssim.mean);
            }
        r.push_back(std::move(sr));
        s.push_back(std::move(ss));
    }
    io::write_line_plot(out / "rmse_vs_size.png", labels, r, "RMSE (HU) outside metal");
    io::write_line_plot(out / "ssim_vs_size.png", labels, s, "SSIM");
}

}  // namespace detail

inline Models load_models(const std::filesystem::path& models_dir, std::vector<std::string>& warnings) {
    Models m;
    if (std::filesystem::exists(models_dir / "pc" / "manifest.txt")) m.pc = gan::load_bundle(models_dir / "pc");
    else warnings.push_back("no PC model under " + (models_dir / "pc").string() + "; PC and PC+SC skipped");
    if (std::filesystem::exists(models_dir / "sc" / "manifest.txt")) m.sc = gan::load_bundle(models_dir / "sc");
    else warnings.push_back("no SC model under " + (models_dir / "sc").string() + "; PC+SC skipped");
    return m;
}

/**
 * Evaluates the configured methods on the dataset's held-out cases and
 * writes metrics.csv, aggregate.csv, the two size plots, a panel figure and
 * summary.txt into `out`. Methods whose model is missing are skipped with a
 * warning; the remaining ones still run.
 */
inline Report run_experiment(const ExperimentConfig& c, const std::filesystem::path& dataset_dir, const Models& models,
                             const std::filesystem::path& out, std::vector<std::string> warnings = {}) {
    c.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const auto manifest = load_manifest(dataset_dir);
    if (manifest.seed != c.seed || manifest.height != c.grid.slices || manifest.width != c.geometry.n_detectors)
        throw ConfigError("dataset " + dataset_dir.string() + " was built with a different configuration");
    const auto cases = load_test_cases(dataset_dir);
    const auto library = c.library();
    for (const auto* model : {models.pc ? &*models.pc : nullptr, models.sc ? &*models.sc : nullptr})
        if (model && (model->norm.lo != manifest.norm.lo || model->norm.hi != manifest.norm.hi))
            throw ConfigError("model normalization does not match the dataset");

    Report rep;
    rep.warnings = std::move(warnings);
    std::map<std::uint64_t, ct::SinogramStack> scans;
    for (const auto& tc : cases)
        if (!scans.count(tc.phantom)) scans.emplace(tc.phantom, ct::SinogramStack{});
    std::vector<std::uint64_t> phantoms;
    for (const auto& [id, s] : scans) phantoms.push_back(id);
    detail::parallel_for(phantoms.size(), c.threads, [&](std::size_t i) { scans.at(phantoms[i]) = clean_scan(c, phantoms[i]); });
    // Results land in per-case slots, so the output does not depend on scheduling.
    std::vector<CaseResult> results(cases.size());
    detail::parallel_for(cases.size(), c.threads, [&](std::size_t i) {
        results[i] = evaluate_case(c, cases[i], scans.at(cases[i].phantom), library, models);
    });

    std::vector<std::vector<double>> tiles;
    std::size_t panel_cols = 0;
    for (std::size_t i = 0; i < cases.size(); ++i) {
        auto& res = results[i];
        if (cases[i].id < c.panels) {
            // Column order: input first, then GT, then the remaining methods.
            std::vector<const ct::Image*> order;
            for (const auto& [name, img] : res.images)
                if (name == "input") order.push_back(&img);
            for (const auto& [name, img] : res.images)
                if (name != "input") order.push_back(&img);
            panel_cols = order.size();
            for (const auto* img : order) tiles.push_back(img->values);
        }
        rep.rows.insert(rep.rows.end(), res.rows.begin(), res.rows.end());
    }
    rep.aggregates = aggregate(rep.rows, c.bins, c.methods);
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::filesystem::create_directories(out);
    marf::write_file_atomic(out / "metrics.csv", detail::metrics_csv(rep.rows));
    marf::write_file_atomic(out / "aggregate.csv", detail::aggregate_csv(rep.aggregates));
    detail::write_plots(out, rep.aggregates, c.bins, c.methods);
    if (!tiles.empty()) io::write_panel_grid(out / "panels.png", tiles, c.grid.size, c.grid.size, panel_cols, {40.0, 800.0});

    std::string sum = "cases " + std::to_string(cases.size()) + "\n";
    for (const auto& m : c.methods) {
        std::vector<double> r, s, t;
        for (const auto& row : rep.rows)
            if (row.method == m) {
                r.push_back(row.rmse_hu);
                s.push_back(row.ssim);
                t.push_back(row.rmse_trace);
            }
        const auto a = stat_of(r), b = stat_of(s), d = stat_of(t);
        sum += m + ": n " + std::to_string(a.n) + ", rmse_hu " + detail::fmt(a.mean) + ", ssim " + detail::fmt(b.mean) +
               ", rmse_trace " + detail::fmt(d.mean) + "\n";
    }
    for (const auto& w : rep.warnings) sum += "warning: " + w + "\n";
    marf::write_file_atomic(out / "summary.txt", sum);
    return rep;
}

}  // namespace mar::eval
