#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "mar/core/error.hpp"
#include "mar/ct/geometry.hpp"
#include "mar/ct/simulate.hpp"
#include "mar/eval/volume.hpp"
#include "mar/gan/config.hpp"
#include "mar/gan/train.hpp"
#include "mar/mask/blob.hpp"

namespace mar::eval {

enum class MaskSource { blob, metal_library };

inline const std::vector<std::string>& known_methods() {
    static const std::vector<std::string> m = {"input", "LI", "NMAR", "PC", "PC+SC"};
    return m;
}

/// Mask-size bins from ascending edges: [0,e0), [e0,e1), ..., [e_last, inf).
struct SizeBins {
    std::vector<std::size_t> edges{200, 500, 1000, 2000};

    void validate() const {
        for (std::size_t i = 1; i < edges.size(); ++i)
            if (edges[i] <= edges[i - 1]) throw ConfigError("mask-size bin edges must be strictly increasing");
    }
    std::size_t count() const { return edges.size() + 1; }
    std::size_t index(std::size_t pixels) const {
        return static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), pixels) - edges.begin());
    }
    std::string label(std::size_t i) const {
        if (edges.empty()) return "all";
        if (i == 0) return "<" + std::to_string(edges[0]);
        if (i == edges.size()) return ">" + std::to_string(edges.back());
        return std::to_string(edges[i - 1]) + "-" + std::to_string(edges[i]);
    }
};

/// 64 views over a full turn, 64 bins of 2 mm, fan beam.
inline ct::ScanGeometry desk_geometry() {
    ct::ScanGeometry g;
    g.n_views = 64;
    g.n_detectors = 64;
    g.detector_spacing = 2.0;
    g.source_to_center = 300.0;
    g.beam = ct::Beam::fan;
    return g;
}

struct ExperimentConfig {
    ct::ScanGeometry geometry = desk_geometry();
    VolumeGrid grid;
    double photons = 2e7;
    ct::PhysicsModel physics = ct::PhysicsModel::two_bin_iron();

    std::size_t train_phantoms = 40;
    std::size_t test_phantoms = 10;
    std::size_t train_samples = 200;
    std::size_t sc_samples = 200;
    double sc_holdout = 0.2;                // fraction of training phantoms kept out of SC training
    std::size_t sc_validation_samples = 40; // SC pairs from those phantoms, used for model selection
    std::size_t test_cases = 50;
    std::size_t shard_size = 100;
    MaskSource mask_source = MaskSource::metal_library;
    BlobParams blob;
    std::filesystem::path library_dir;  // empty: bundled shapes

    SizeBins bins;
    std::vector<std::string> methods = known_methods();

    std::vector<std::size_t> gen_widths{16, 32, 64, 128};
    std::vector<std::size_t> disc_widths{16, 32, 64};
    bool mpn = true;
    std::size_t iterations_pc = 2000;
    std::size_t iterations_sc = 1000;
    std::size_t batch = 16;
    double lr = 5e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double lambda = 100.0;
    std::size_t validate_every = 50;  // 0: keep the last SC iterate
    bool augment = true;  // flips for PC; view shifts and mirrors for SC on full-circle scans

    double metal_value = 3000.0;  // HU written into metal pixels after MAR
    std::size_t panels = 4;
    std::size_t threads = 0;  // case-level workers; 0: one per hardware thread
    std::uint64_t seed = 1;
    std::filesystem::path out_dir = "mar_out";

    gan::GeneratorConfig generator() const { return gan::GeneratorConfig::make(gen_widths, mpn); }
    gan::DiscriminatorConfig discriminator() const { return gan::DiscriminatorConfig::make(disc_widths); }

    gan::TrainHyper hyper(std::size_t iterations, std::uint64_t stage) const {
        gan::TrainHyper h;
        h.adam = {lr, beta1, beta2, 1e-8};
        h.weights = {lambda};
        h.batch = batch;
        h.iterations = iterations;
        h.seed = derive_seed(seed, 0x7a1, stage);
        if (augment) {
            const bool full_circle = std::abs(geometry.angular_range - 2.0 * std::numbers::pi) < 1e-9;
            h.augment = stage == 0 ? gan::Augment::projection : full_circle ? gan::Augment::sinogram : gan::Augment::none;
        }
        return h;
    }

    std::vector<Mask> library() const {
        return library_dir.empty() ? builtin_metal_library() : load_metal_library(library_dir);
    }

    bool has_method(const std::string& m) const { return std::find(methods.begin(), methods.end(), m) != methods.end(); }

    void validate() const {
        geometry.validate();
        if (grid.size == 0 || grid.slices < 12) throw ConfigError("volume needs size > 0 and at least 12 slices");
        ct::Image probe(grid.size, grid.size, grid.pixel_size);
        geometry.validate(probe);
        if (!(photons > 0.0)) throw ConfigError("photons must be positive");
        if (train_phantoms == 0 || test_phantoms == 0) throw ConfigError("need at least one train and one test phantom");
        if (train_samples == 0 || test_cases == 0 || shard_size == 0) throw ConfigError("sample counts must be positive");
        if (batch == 0) throw ConfigError("batch must be positive");
        if (!(sc_holdout >= 0.0 && sc_holdout < 1.0)) throw ConfigError("sc_holdout must lie in [0, 1)");
        if (!(lr > 0.0) || !(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
            throw ConfigError("invalid optimizer settings");
        gan::LossWeights{lambda}.validate();
        blob.validate();
        bins.validate();
        if (methods.empty()) throw ConfigError("method list is empty");
        for (const auto& m : methods)
            if (std::find(known_methods().begin(), known_methods().end(), m) == known_methods().end())
                throw ConfigError("unknown method '" + m + "'");
        generator().feature_extents(grid.slices);
        generator().feature_extents(grid.size);
        generator().feature_extents(geometry.n_views);
        generator().feature_extents(geometry.n_detectors);
        discriminator().modulation().extents(std::min({grid.slices, geometry.n_views, geometry.n_detectors}));
    }
};

namespace detail {

inline std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline std::vector<std::size_t> parse_sizes(const std::string& s, const std::string& key) {
    std::vector<std::size_t> out;
    for (const auto& item : split_list(s)) {
        try {
            std::size_t pos = 0;
            const auto v = std::stoull(item, &pos);
            if (pos != item.size() || item[0] == '-') throw std::invalid_argument(item);
            out.push_back(static_cast<std::size_t>(v));
        } catch (const std::exception&) {
            throw ConfigError(key + ": '" + item + "' is not a non-negative integer");
        }
    }
    return out;
}

}  // namespace detail

/**
 * Reads an experiment description: named sections of `key = value` lines.
 * Unknown sections or keys are errors so that typos do not pass silently.
 */
inline ExperimentConfig parse_experiment_config(std::istream& in) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    static const std::vector<std::pair<std::string, std::vector<std::string>>> allowed = {
        {"geometry", {"views", "detectors", "detector_spacing", "angular_range", "beam", "source_to_center"}},
        {"volume", {"size", "slices", "pixel_size"}},
        {"physics", {"photons"}},
        {"dataset",
         {"train_phantoms", "test_phantoms", "train_samples", "sc_samples", "sc_holdout", "sc_validation_samples", "test_cases", "shard_size", "mask_source",
          "library"}},
        {"bins", {"edges"}},
        {"methods", {"list"}},
        {"generator", {"widths", "mpn"}},
        {"discriminator", {"widths"}},
        {"training", {"iterations_pc", "iterations_sc", "batch", "lr", "beta1", "beta2", "lambda", "validate_every", "augment"}},
        {"eval", {"metal_value", "panels", "threads"}},
        {"run", {"seed", "out"}},
    };
    for (const auto& [section, keys] : tree) {
        auto it = std::find_if(allowed.begin(), allowed.end(), [&](const auto& p) { return p.first == section; });
        if (it == allowed.end()) throw ConfigError("config: unknown section [" + section + "]");
        for (const auto& [key, value] : keys) {
            (void)value;
            if (std::find(it->second.begin(), it->second.end(), key) == it->second.end())
                throw ConfigError("config: unknown key '" + key + "' in [" + section + "]");
        }
    }

    ExperimentConfig c;
    auto get = [&]<typename V>(const std::string& path, V& target) {
        auto v = tree.get_optional<std::string>(path);
        if (!v) return;
        std::istringstream is(detail::trim(*v));
        V parsed{};
        if constexpr (std::is_same_v<V, bool>) {
            std::string s;
            is >> s;
            if (s == "true" || s == "1" || s == "yes") parsed = true;
            else if (s == "false" || s == "0" || s == "no") parsed = false;
            else throw ConfigError("config: " + path + " must be true or false");
        } else {
            if (!(is >> parsed) || !is.eof()) throw ConfigError("config: cannot parse " + path + " = '" + *v + "'");
            if constexpr (std::is_unsigned_v<V>)
                if (detail::trim(*v).starts_with("-")) throw ConfigError("config: " + path + " must be non-negative");
        }
        target = parsed;
    };
    get("geometry.views", c.geometry.n_views);
    get("geometry.detectors", c.geometry.n_detectors);
    get("geometry.detector_spacing", c.geometry.detector_spacing);
    get("geometry.angular_range", c.geometry.angular_range);
    get("geometry.source_to_center", c.geometry.source_to_center);
    if (auto beam = tree.get_optional<std::string>("geometry.beam")) {
        const auto b = detail::trim(*beam);
        if (b == "parallel") c.geometry.beam = ct::Beam::parallel;
        else if (b == "fan") c.geometry.beam = ct::Beam::fan;
        else throw ConfigError("config: geometry.beam must be parallel or fan");
    }
    get("volume.size", c.grid.size);
    get("volume.slices", c.grid.slices);
    get("volume.pixel_size", c.grid.pixel_size);
    get("physics.photons", c.photons);
    get("dataset.train_phantoms", c.train_phantoms);
    get("dataset.test_phantoms", c.test_phantoms);
    get("dataset.train_samples", c.train_samples);
    get("dataset.sc_samples", c.sc_samples);
    get("dataset.sc_holdout", c.sc_holdout);
    get("dataset.sc_validation_samples", c.sc_validation_samples);
    get("dataset.test_cases", c.test_cases);
    get("dataset.shard_size", c.shard_size);
    if (auto src = tree.get_optional<std::string>("dataset.mask_source")) {
        const auto s = detail::trim(*src);
        if (s == "blob") c.mask_source = MaskSource::blob;
        else if (s == "metal-library") c.mask_source = MaskSource::metal_library;
        else throw ConfigError("config: dataset.mask_source must be blob or metal-library");
    }
    if (auto lib = tree.get_optional<std::string>("dataset.library")) c.library_dir = detail::trim(*lib);
    if (auto e = tree.get_optional<std::string>("bins.edges")) c.bins.edges = detail::parse_sizes(*e, "bins.edges");
    if (auto m = tree.get_optional<std::string>("methods.list")) c.methods = detail::split_list(*m);
    if (auto w = tree.get_optional<std::string>("generator.widths")) c.gen_widths = detail::parse_sizes(*w, "generator.widths");
    get("generator.mpn", c.mpn);
    if (auto w = tree.get_optional<std::string>("discriminator.widths"))
        c.disc_widths = detail::parse_sizes(*w, "discriminator.widths");
    get("training.iterations_pc", c.iterations_pc);
    get("training.iterations_sc", c.iterations_sc);
    get("training.batch", c.batch);
    get("training.lr", c.lr);
    get("training.beta1", c.beta1);
    get("training.beta2", c.beta2);
    get("training.lambda", c.lambda);
    get("training.validate_every", c.validate_every);
    get("training.augment", c.augment);
    get("eval.metal_value", c.metal_value);
    get("eval.panels", c.panels);
    get("eval.threads", c.threads);
    get("run.seed", c.seed);
    if (auto o = tree.get_optional<std::string>("run.out")) c.out_dir = detail::trim(*o);
    c.validate();
    return c;
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    return parse_experiment_config(in);
}

}  // namespace mar::eval
