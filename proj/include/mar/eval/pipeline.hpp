#pragma once

#include <filesystem>
#include <vector>

#include "mar/eval/config.hpp"
#include "mar/eval/dataset.hpp"
#include "mar/eval/experiment.hpp"
#include "mar/gan/bundle.hpp"
#include "mar/gan/train.hpp"

namespace mar::eval {

/// Directory layout under a run root.
struct RunPaths {
    std::filesystem::path root;
    std::filesystem::path dataset() const { return root / "dataset"; }
    std::filesystem::path models() const { return root / "models"; }
    std::filesystem::path pc() const { return models() / "pc"; }
    std::filesystem::path sc() const { return models() / "sc"; }
    std::filesystem::path report() const { return root / "report"; }
};

inline gan::TrainResult train_pc_stage(const ExperimentConfig& c, const RunPaths& p) {
    const auto m = load_manifest(p.dataset());
    const auto data = load_train_samples(p.dataset());
    auto h = c.hyper(c.iterations_pc, 0);
    h.checkpoint_dir = p.root / "checkpoints" / "pc";
    auto res = gan::train_pc(data, c.generator(), c.discriminator(), m.norm, h);
    gan::save_bundle(res.bundle, p.pc());
    return res;
}

inline gan::TrainResult train_sc_stage(const ExperimentConfig& c, const RunPaths& p) {
    const auto m = load_manifest(p.dataset());
    if (!std::filesystem::exists(p.pc() / "manifest.txt"))
        throw ConfigError("SC training needs a PC model in " + p.pc().string());
    const auto pc = gan::load_bundle(p.pc());
    const auto data = build_sc_samples(c, m, pc);
    auto h = c.hyper(c.iterations_sc, 1);
    h.validation = build_sc_validation(c, m, pc);
    h.validate_every = c.validate_every;
    h.checkpoint_dir = p.root / "checkpoints" / "sc";
    auto res = gan::train_sc(data, c.generator(), c.discriminator(), m.norm, h);
    gan::save_bundle(res.bundle, p.sc());
    return res;
}

inline Report evaluate_stage(const ExperimentConfig& c, const RunPaths& p) {
    std::vector<std::string> warnings;
    const auto models = load_models(p.models(), warnings);
    return run_experiment(c, p.dataset(), models, p.report(), std::move(warnings));
}

struct PipelineResult {
    DatasetManifest manifest;
    gan::TrainResult pc;
    gan::TrainResult sc;
    Report report;
};

/// Dataset, PC training, SC training and evaluation, in that order.
inline PipelineResult run_pipeline(const ExperimentConfig& c, const RunPaths& p) {
    PipelineResult r;
    r.manifest = build_dataset(c, p.dataset());
    r.pc = train_pc_stage(c, p);
    r.sc = train_sc_stage(c, p);
    r.report = evaluate_stage(c, p);
    return r;
}

}  // namespace mar::eval
