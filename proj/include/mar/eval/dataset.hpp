#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mar/core/error.hpp"
#include "mar/core/random.hpp"
#include "mar/ct/stack.hpp"
#include "mar/eval/config.hpp"
#include "mar/eval/volume.hpp"
#include "mar/gan/bundle.hpp"
#include "mar/gan/infer.hpp"
#include "mar/gan/sample.hpp"
#include "mar/mask/blob.hpp"
#include "mar/tensor/marf.hpp"

namespace mar::eval {

/// Stream tags keeping the training, SC and test draws independent.
inline constexpr std::uint64_t kTrainMetalStream = 0x7a17;
inline constexpr std::uint64_t kScMetalStream = 0x5c5c;
inline constexpr std::uint64_t kScValidationStream = 0x5cfa;
inline constexpr std::uint64_t kTestMetalStream = 0x7e57;

struct DatasetManifest {
    gan::Normalization norm;
    std::vector<std::uint64_t> train_ids;
    std::vector<std::uint64_t> test_ids;
    std::size_t samples = 0;
    std::size_t shards = 0;
    std::size_t height = 0;  // projection rows (slices)
    std::size_t width = 0;   // projection columns (detector bins)
    std::uint64_t seed = 0;
};

struct TestCase {
    std::size_t id = 0;
    std::uint64_t phantom = 0;
    MetalObject metal;
};

inline std::vector<std::uint64_t> train_ids(const ExperimentConfig& c) {
    std::vector<std::uint64_t> ids;
    for (std::size_t i = 0; i < c.train_phantoms; ++i) ids.push_back(i);
    return ids;
}

/// Test phantoms follow the training ids, so the split never shares a phantom.
inline std::vector<std::uint64_t> test_ids(const ExperimentConfig& c) {
    std::vector<std::uint64_t> ids;
    for (std::size_t i = 0; i < c.test_phantoms; ++i) ids.push_back(c.train_phantoms + i);
    return ids;
}

inline std::vector<TestCase> make_test_cases(const ExperimentConfig& c, const std::vector<Mask>& library) {
    const auto ids = test_ids(c);
    std::vector<TestCase> out;
    for (std::size_t k = 0; k < c.test_cases; ++k)
        out.push_back({k, ids[k % ids.size()], random_metal(derive_seed(c.seed, kTestMetalStream), k, library, c.grid)});
    return out;
}

/// Noisy metal-free scan of a phantom volume.
inline ct::SinogramStack clean_scan(const ExperimentConfig& c, std::uint64_t phantom) {
    const auto slices = render_volume(limb_phantom(c.seed, phantom, c.grid), c.grid);
    return simulate_volume(slices, nullptr, c.geometry, c.physics, c.photons, c.seed, phantom);
}

namespace detail {

inline std::string join_ids(const std::vector<std::uint64_t>& ids) {
    std::string s;
    for (auto id : ids) s += (s.empty() ? "" : ",") + std::to_string(id);
    return s;
}

inline std::vector<std::uint64_t> parse_ids(const std::string& s) {
    std::vector<std::uint64_t> out;
    for (auto v : parse_sizes(s, "ids")) out.push_back(v);
    return out;
}

inline std::string shard_name(std::size_t k, const char* part) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "train_%03zu.%s.marf", k, part);
    return buf;
}

inline std::vector<float> normalized(const gan::Normalization& n, const std::vector<double>& v) {
    std::vector<float> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(n.forward(v[i]));
    return out;
}

}  // namespace detail

/// Projection-domain mask for training sample k.
inline Mask training_mask(const ExperimentConfig& c, std::size_t k, const std::vector<Mask>& library, std::size_t& view) {
    CounterRng rng(derive_seed(c.seed, kTrainMetalStream ^ 0xf00, k));
    view = static_cast<std::size_t>(rng.uniform_int(0, static_cast<long long>(c.geometry.n_views) - 1));
    if (c.mask_source == MaskSource::blob)
        return gen_blob_mask(c.geometry.n_detectors, c.grid.slices, c.blob, derive_seed(c.seed, kTrainMetalStream, k));
    const auto metal = random_metal(derive_seed(c.seed, kTrainMetalStream), k, library, c.grid);
    const auto traces = metal_traces(metal_masks(metal, library, c.grid), c.grid.pixel_size, c.geometry);
    return ct::projection_mask_of(traces, view);
}

/**
 * Simulates the training phantoms, fixes the normalization from their global
 * range, and writes `train_samples` masked projection pairs in shards, plus
 * the held-out case list. Output goes to a staging directory that replaces
 * `dir` only when complete; on failure the staging directory is removed.
 */
inline DatasetManifest build_dataset(const ExperimentConfig& c, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    namespace pt = boost::property_tree;
    c.validate();
    const fs::path staging = dir.string() + ".partial";
    fs::remove_all(staging);
    fs::create_directories(staging);
    try {
        const auto library = c.library();
        DatasetManifest m;
        m.train_ids = train_ids(c);
        m.test_ids = test_ids(c);
        m.seed = c.seed;
        m.height = c.grid.slices;
        m.width = c.geometry.n_detectors;

        std::vector<ct::SinogramStack> scans;
        std::vector<double> all;
        for (auto id : m.train_ids) {
            scans.push_back(clean_scan(c, id));
            for (const auto& s : scans.back()) all.insert(all.end(), s.values.begin(), s.values.end());
        }
        m.norm = gan::Normalization::of(all);
        all.clear();

        std::vector<gan::TrainingSample> shard;
        auto flush = [&] {
            if (shard.empty()) return;
            const ad::Shape shape{shard.size(), 1, m.height, m.width};
            std::vector<float> x, y, s;
            for (const auto& t : shard) {
                x.insert(x.end(), t.x.begin(), t.x.end());
                y.insert(y.end(), t.y.begin(), t.y.end());
                for (auto v : t.s.values) s.push_back(static_cast<float>(v));
            }
            marf::save<float>(staging / detail::shard_name(m.shards, "x"), shape, x);
            marf::save<float>(staging / detail::shard_name(m.shards, "y"), shape, y);
            marf::save<float>(staging / detail::shard_name(m.shards, "s"), shape, s);
            ++m.shards;
            shard.clear();
        };
        for (std::size_t k = 0; m.samples < c.train_samples; ++k) {
            if (k > 100 * c.train_samples) throw ConfigError("dataset: masks keep coming out empty");
            std::size_t view = 0;
            auto mask = training_mask(c, k, library, view);
            if (mask.empty()) continue;
            const auto& scan = scans[m.samples % scans.size()];
            auto y = detail::normalized(m.norm, ct::projection_of(scan, view));
            shard.push_back(gan::TrainingSample::masked(m.width, m.height, std::move(y), std::move(mask)));
            ++m.samples;
            if (shard.size() == c.shard_size) flush();
        }
        flush();

        std::string cases = "case,phantom,shape,factor,row,col,flip_rows,flip_cols,z0,z1\n";
        for (const auto& t : make_test_cases(c, library)) {
            const auto& mo = t.metal;
            std::ostringstream os;
            os << t.id << ',' << t.phantom << ',' << mo.shape << ',' << mo.factor << ',' << mo.at.row << ',' << mo.at.col
               << ',' << mo.at.flip_rows << ',' << mo.at.flip_cols << ',' << mo.z0 << ',' << mo.z1 << '\n';
            cases += os.str();
        }
        marf::write_file_atomic(staging / "test_cases.csv", cases);

        pt::ptree tree;
        tree.put("dataset.seed", m.seed);
        tree.put("dataset.samples", m.samples);
        tree.put("dataset.shards", m.shards);
        tree.put("dataset.height", m.height);
        tree.put("dataset.width", m.width);
        tree.put("dataset.norm_lo", gan::detail::format_double(m.norm.lo));
        tree.put("dataset.norm_hi", gan::detail::format_double(m.norm.hi));
        tree.put("dataset.train_ids", detail::join_ids(m.train_ids));
        tree.put("dataset.test_ids", detail::join_ids(m.test_ids));
        std::ostringstream os;
        pt::write_ini(os, tree);
        marf::write_file_atomic(staging / "manifest.txt", os.str());
        fs::remove_all(dir);
        if (dir.has_parent_path()) fs::create_directories(dir.parent_path());
        fs::rename(staging, dir);
        return m;
    } catch (...) {
        std::error_code ec;
        fs::remove_all(staging, ec);
        throw;
    }
}

inline DatasetManifest load_manifest(const std::filesystem::path& dir) {
    namespace pt = boost::property_tree;
    const auto path = dir / "manifest.txt";
    if (!std::filesystem::exists(path)) throw ConfigError("dataset " + dir.string() + " has no manifest.txt");
    pt::ptree tree;
    try {
        pt::read_ini(path.string(), tree);
        DatasetManifest m;
        m.seed = tree.get<std::uint64_t>("dataset.seed");
        m.samples = tree.get<std::size_t>("dataset.samples");
        m.shards = tree.get<std::size_t>("dataset.shards");
        m.height = tree.get<std::size_t>("dataset.height");
        m.width = tree.get<std::size_t>("dataset.width");
        m.norm = {tree.get<double>("dataset.norm_lo"), tree.get<double>("dataset.norm_hi")};
        m.train_ids = detail::parse_ids(tree.get<std::string>("dataset.train_ids"));
        m.test_ids = detail::parse_ids(tree.get<std::string>("dataset.test_ids"));
        return m;
    } catch (const pt::ptree_error& e) {
        throw ConfigError("dataset manifest: " + std::string(e.what()));
    }
}

inline std::vector<gan::TrainingSample> load_train_samples(const std::filesystem::path& dir) {
    const auto m = load_manifest(dir);
    std::vector<gan::TrainingSample> out;
    for (std::size_t k = 0; k < m.shards; ++k) {
        const auto x = marf::load(dir / detail::shard_name(k, "x"));
        const auto y = marf::load(dir / detail::shard_name(k, "y"));
        const auto s = marf::load(dir / detail::shard_name(k, "s"));
        if (x.shape.size() != 4 || x.shape != y.shape || x.shape != s.shape || x.shape[2] != m.height || x.shape[3] != m.width)
            throw ConfigError("dataset shard " + std::to_string(k) + " has an unexpected shape");
        const std::size_t plane = m.height * m.width;
        for (std::size_t i = 0; i < x.shape[0]; ++i) {
            gan::TrainingSample t{m.width, m.height, {}, {}, Mask(m.width, m.height, MaskDomain::projection)};
            for (std::size_t j = 0; j < plane; ++j) {
                t.x.push_back(static_cast<float>(x.values[i * plane + j]));
                t.y.push_back(static_cast<float>(y.values[i * plane + j]));
                t.s.values[j] = s.values[i * plane + j] != 0.0 ? 1 : 0;
            }
            out.push_back(std::move(t));
        }
    }
    if (out.size() != m.samples) throw ConfigError("dataset: sample count does not match manifest");
    return out;
}

inline std::vector<TestCase> load_test_cases(const std::filesystem::path& dir) {
    std::ifstream in(dir / "test_cases.csv");
    if (!in) throw ConfigError("dataset " + dir.string() + " has no test_cases.csv");
    std::string line;
    std::getline(in, line);
    std::vector<TestCase> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        TestCase t;
        char c;
        int fr = 0, fc = 0;
        if (!(ss >> t.id >> c >> t.phantom >> c >> t.metal.shape >> c >> t.metal.factor >> c >> t.metal.at.row >> c >>
              t.metal.at.col >> c >> fr >> c >> fc >> c >> t.metal.z0 >> c >> t.metal.z1))
            throw ConfigError("test_cases.csv: bad line '" + line + "'");
        t.metal.at.flip_rows = fr != 0;
        t.metal.at.flip_cols = fc != 0;
        out.push_back(t);
    }
    return out;
}

/// Training phantoms for the residual stage: the last floor(sc_holdout * n) are
/// kept out of SC training and only supply validation pairs.
inline std::pair<std::vector<std::uint64_t>, std::vector<std::uint64_t>> sc_split(const ExperimentConfig& c,
                                                                                  const DatasetManifest& m) {
    const auto n = m.train_ids.size();
    auto held = static_cast<std::size_t>(c.sc_holdout * static_cast<double>(n));
    if (held >= n) held = n - 1;
    const auto cut = m.train_ids.begin() + static_cast<std::ptrdiff_t>(n - held);
    return {{m.train_ids.begin(), cut}, {cut, m.train_ids.end()}};
}

namespace detail {

inline std::vector<gan::TrainingSample> sc_pairs(const ExperimentConfig& c, const DatasetManifest& m,
                                                 const gan::ModelBundle& pc, const std::vector<std::uint64_t>& ids,
                                                 std::size_t count, std::uint64_t stream, std::size_t per_volume) {
    const auto library = c.library();
    std::vector<gan::TrainingSample> out;
    for (std::size_t k = 0; out.size() < count; ++k) {
        if (k > 100 * count) throw ConfigError("sc samples: implants keep missing the volume");
        const auto phantom = ids[k % ids.size()];
        const auto metal = random_metal(derive_seed(c.seed, stream), k, library, c.grid);
        const auto traces = metal_traces(metal_masks(metal, library, c.grid), c.grid.pixel_size, c.geometry);
        const auto scan = clean_scan(c, phantom);
        gan::InferOptions opts;
        opts.reconstruct = false;
        const auto done = gan::infer_mar(scan, traces, pc, nullptr, c.geometry, opts);
        std::vector<std::size_t> zs;
        for (std::size_t z = metal.z0; z < metal.z1; ++z)
            if (!traces[z].empty()) zs.push_back(z);
        const std::size_t take = std::min(per_volume, zs.size());
        for (std::size_t i = 0; i < take && out.size() < count; ++i) {
            const auto z = zs[i * zs.size() / take];
            gan::TrainingSample t{c.geometry.n_detectors, c.geometry.n_views,
                                  normalized(m.norm, done.sinograms[z].values), normalized(m.norm, scan[z].values),
                                  traces[z]};
            t.s.domain = MaskDomain::trace;
            out.push_back(std::move(t));
        }
    }
    return out;
}

}  // namespace detail

/**
 * Sinogram-domain pairs for the residual stage: SC training phantoms receive
 * fresh implants, every view is completed by the PC model, and the metal
 * slices of the restacked result become inputs with the clean sinograms as
 * targets. At most `per_volume` slices are taken from one volume.
 */
inline std::vector<gan::TrainingSample> build_sc_samples(const ExperimentConfig& c, const DatasetManifest& m,
                                                         const gan::ModelBundle& pc, std::size_t per_volume = 6) {
    return detail::sc_pairs(c, m, pc, sc_split(c, m).first, c.sc_samples, kScMetalStream, per_volume);
}

/// Same construction on the held-out training phantoms; empty without a holdout.
inline std::vector<gan::TrainingSample> build_sc_validation(const ExperimentConfig& c, const DatasetManifest& m,
                                                            const gan::ModelBundle& pc, std::size_t per_volume = 6) {
    const auto ids = sc_split(c, m).second;
    if (ids.empty() || c.sc_validation_samples == 0) return {};
    return detail::sc_pairs(c, m, pc, ids, c.sc_validation_samples, kScValidationStream, per_volume);
}

}  // namespace mar::eval
