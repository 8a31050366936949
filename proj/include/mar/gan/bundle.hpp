#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdint>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "mar/core/error.hpp"
#include "mar/gan/config.hpp"
#include "mar/gan/model.hpp"
#include "mar/gan/sample.hpp"
#include "mar/tensor/marf.hpp"

namespace mar::gan {

enum class Stage { pc, sc };

inline std::string stage_name(Stage s) { return s == Stage::pc ? "pc" : "sc"; }

/// Trained (or freshly initialized) generator/discriminator pair with metadata.
struct ModelBundle {
    Stage stage = Stage::pc;
    GeneratorConfig gen_cfg;
    DiscriminatorConfig disc_cfg;
    ParamSet<float> gen;
    ParamSet<float> disc;
    Normalization norm;
    LossWeights weights;
    std::uint64_t seed = 0;
    std::size_t iterations = 0;

    static ModelBundle initialize(Stage stage, GeneratorConfig g, DiscriminatorConfig d, Normalization norm,
                                  std::uint64_t seed) {
        if (stage == Stage::sc) g.zero_init_output = true;
        ModelBundle b{stage, g, d, init_generator<float>(g, seed), init_discriminator<float>(d, seed), norm, {}, seed, 0};
        return b;
    }
};

namespace detail {

inline std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

inline std::string format_specs(const std::vector<ad::ConvSpec>& specs) {
    std::string out;
    for (const auto& c : specs) {
        if (!out.empty()) out += ";";
        out += std::to_string(c.in_channels) + "," + std::to_string(c.out_channels) + "," + std::to_string(c.kernel) +
               "," + std::to_string(c.stride) + "," + std::to_string(c.padding);
    }
    return out;
}

inline std::vector<ad::ConvSpec> parse_specs(const std::string& text) {
    std::vector<ad::ConvSpec> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ';')) {
        ad::ConvSpec c;
        char sep[4];
        std::stringstream is(item);
        if (!(is >> c.in_channels >> sep[0] >> c.out_channels >> sep[1] >> c.kernel >> sep[2] >> c.stride >> sep[3] >>
              c.padding))
            throw ConfigError("bad layer spec '" + item + "'");
        out.push_back(c);
    }
    return out;
}

inline std::string tensor_file(const std::string& prefix, const std::string& name) {
    return prefix + "." + name + ".marf";
}

}  // namespace detail

/// Writes `dir`/manifest.txt plus one MARF file per tensor. The directory is
/// assembled next to the target and renamed into place.
inline void save_bundle(const ModelBundle& b, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    namespace pt = boost::property_tree;
    const fs::path staging = dir.string() + ".partial";
    fs::remove_all(staging);
    fs::create_directories(staging);
    pt::ptree tree;
    tree.put("model.stage", stage_name(b.stage));
    tree.put("model.seed", b.seed);
    tree.put("model.iterations", b.iterations);
    tree.put("model.norm_lo", detail::format_double(b.norm.lo));
    tree.put("model.norm_hi", detail::format_double(b.norm.hi));
    tree.put("model.lambda", detail::format_double(b.weights.lambda));
    const auto& g = b.gen_cfg;
    tree.put("generator.in_channels", g.in_channels);
    tree.put("generator.out_channels", g.out_channels);
    tree.put("generator.encoder", detail::format_specs(g.encoder));
    tree.put("generator.decoder", detail::format_specs(g.decoder));
    tree.put("generator.encoder_act", activation_name(g.encoder_act.kind));
    tree.put("generator.encoder_slope", detail::format_double(g.encoder_act.slope));
    tree.put("generator.decoder_act", activation_name(g.decoder_act.kind));
    tree.put("generator.output_act", activation_name(g.output_act.kind));
    tree.put("generator.mpn", g.mpn);
    tree.put("generator.skips", g.skips);
    tree.put("generator.zero_init_output", g.zero_init_output);
    tree.put("discriminator.blocks", detail::format_specs(b.disc_cfg.blocks));
    tree.put("discriminator.act", activation_name(b.disc_cfg.act.kind));
    tree.put("discriminator.slope", detail::format_double(b.disc_cfg.act.slope));
    auto write_set = [&](const ParamSet<float>& ps, const std::string& prefix) {
        for (std::size_t i = 0; i < ps.tensors.size(); ++i) {
            const auto file = detail::tensor_file(prefix, ps.names[i]);
            marf::save(staging / file, ps.tensors[i]);
            tree.put(pt::ptree::path_type("tensors/" + prefix + "." + ps.names[i], '/'), file);
        }
    };
    write_set(b.gen, "gen");
    write_set(b.disc, "disc");
    std::ostringstream os;
    pt::write_ini(os, tree);
    marf::write_file_atomic(staging / "manifest.txt", os.str());
    fs::remove_all(dir);
    if (dir.has_parent_path()) fs::create_directories(dir.parent_path());
    fs::rename(staging, dir);
}

inline ModelBundle load_bundle(const std::filesystem::path& dir) {
    namespace pt = boost::property_tree;
    const auto manifest = dir / "manifest.txt";
    if (!std::filesystem::exists(manifest)) throw ConfigError("model bundle " + dir.string() + " has no manifest.txt");
    pt::ptree tree;
    try {
        pt::read_ini(manifest.string(), tree);
        ModelBundle b;
        const auto stage = tree.get<std::string>("model.stage");
        if (stage != "pc" && stage != "sc") throw ConfigError("unknown model stage '" + stage + "'");
        b.stage = stage == "pc" ? Stage::pc : Stage::sc;
        b.seed = tree.get<std::uint64_t>("model.seed");
        b.iterations = tree.get<std::size_t>("model.iterations");
        b.norm = {tree.get<double>("model.norm_lo"), tree.get<double>("model.norm_hi")};
        b.weights.lambda = tree.get<double>("model.lambda");
        auto& g = b.gen_cfg;
        g.in_channels = tree.get<std::size_t>("generator.in_channels");
        g.out_channels = tree.get<std::size_t>("generator.out_channels");
        g.encoder = detail::parse_specs(tree.get<std::string>("generator.encoder"));
        g.decoder = detail::parse_specs(tree.get<std::string>("generator.decoder"));
        g.encoder_act = {activation_from_name(tree.get<std::string>("generator.encoder_act")),
                         tree.get<double>("generator.encoder_slope")};
        g.decoder_act = {activation_from_name(tree.get<std::string>("generator.decoder_act"))};
        g.output_act = {activation_from_name(tree.get<std::string>("generator.output_act"))};
        g.mpn = tree.get<bool>("generator.mpn");
        g.skips = tree.get<bool>("generator.skips");
        g.zero_init_output = tree.get<bool>("generator.zero_init_output");
        g.validate();
        b.disc_cfg.blocks = detail::parse_specs(tree.get<std::string>("discriminator.blocks"));
        b.disc_cfg.act = {activation_from_name(tree.get<std::string>("discriminator.act")),
                          tree.get<double>("discriminator.slope")};
        b.disc_cfg.validate();
        // Reference layouts give names and order; values come from disk.
        b.gen = init_generator<float>(g, 0);
        b.disc = init_discriminator<float>(b.disc_cfg, 0);
        auto read_set = [&](ParamSet<float>& ps, const std::string& prefix) {
            for (std::size_t i = 0; i < ps.tensors.size(); ++i) {
                const auto file = tree.get<std::string>(pt::ptree::path_type("tensors/" + prefix + "." + ps.names[i], '/'));
                auto t = marf::load_tensor<float>(dir / file, true);
                if (t.shape() != ps.tensors[i].shape())
                    throw ConfigError("tensor " + file + " has shape " + ad::to_string(t.shape()) + ", expected " +
                                      ad::to_string(ps.tensors[i].shape()));
                ps.tensors[i] = t;
            }
        };
        read_set(b.gen, "gen");
        read_set(b.disc, "disc");
        return b;
    } catch (const pt::ptree_error& e) {
        throw ConfigError("model bundle " + dir.string() + ": " + e.what());
    }
}

}  // namespace mar::gan
