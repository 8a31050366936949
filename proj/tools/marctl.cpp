// marctl: dataset simulation, model training and evaluation for sinogram
// completion metal artifact reduction.

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "mar/core/error.hpp"
#include "mar/eval/config.hpp"
#include "mar/eval/dataset.hpp"
#include "mar/eval/experiment.hpp"
#include "mar/eval/pipeline.hpp"
#include "mar/tensor/gradcheck_suite.hpp"

using namespace mar;

namespace {

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::vector<std::string> methods;
};

eval::ExperimentConfig load(const Options& o) {
    eval::ExperimentConfig c;
    if (!o.config.empty()) c = eval::load_experiment_config(o.config);
    if (o.seed) c.seed = *o.seed;
    if (!o.out.empty()) c.out_dir = o.out;
    if (!o.methods.empty()) c.methods = o.methods;
    c.validate();
    return c;
}

void print_report(const eval::Report& r) {
    for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
    std::printf("%zu rows, %.1f s\n", r.rows.size(), r.seconds);
}

void print_curve(const gan::TrainResult& r) {
    if (r.curve.empty()) return;
    const auto& first = r.curve.front();
    const auto& last = r.curve.back();
    std::printf("iter %zu: D %.4f  G adv %.4f  content %.4f\n", first.iter, first.loss_d, first.loss_g_adv, first.loss_g_content);
    std::printf("iter %zu: D %.4f  G adv %.4f  content %.4f\n", last.iter, last.loss_d, last.loss_g_adv, last.loss_g_content);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Metal artifact reduction by sinogram completion"};
    app.require_subcommand(1);
    Options o;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "experiment config (INI sections)")->check(CLI::ExistingFile);
        sub->add_option("--seed", o.seed, "master seed");
        sub->add_option("--out", o.out, "run directory");
        sub->add_option("--method", o.methods, "methods to evaluate (input, LI, NMAR, PC, PC+SC)")->delimiter(',');
    };
    auto* simulate = app.add_subcommand("simulate", "build the training shards and the held-out case list");
    auto* train_pc = app.add_subcommand("train-pc", "train the projection-completion model");
    auto* train_sc = app.add_subcommand("train-sc", "train the sinogram-correction model on PC output");
    auto* baseline = app.add_subcommand("baseline", "evaluate input, LI and NMAR on the held-out cases");
    auto* evaluate = app.add_subcommand("eval", "evaluate every configured method");
    auto* run = app.add_subcommand("run", "simulate, train-pc, train-sc and eval in sequence");
    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of every differentiable op");
    for (auto* s : {simulate, train_pc, train_sc, baseline, evaluate, run, gradcheck}) common(s);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gradcheck->parsed()) {
            bool ok = true;
            for (const auto& e : ad::gradcheck_suite(o.seed.value_or(1))) {
                std::printf("%-18s %6zu values  max rel %.3e  %s\n", e.name.c_str(), e.result.checked, e.result.max_rel_error,
                            e.passed() ? "ok" : "FAIL");
                ok = ok && e.passed();
            }
            return ok ? 0 : 3;
        }
        auto c = load(o);
        const eval::RunPaths paths{c.out_dir};
        if (simulate->parsed()) {
            const auto m = eval::build_dataset(c, paths.dataset());
            std::printf("%zu samples in %zu shards, %zu test phantoms -> %s\n", m.samples, m.shards, m.test_ids.size(),
                        paths.dataset().c_str());
        } else if (train_pc->parsed()) {
            print_curve(eval::train_pc_stage(c, paths));
        } else if (train_sc->parsed()) {
            print_curve(eval::train_sc_stage(c, paths));
        } else if (baseline->parsed()) {
            if (o.methods.empty()) c.methods = {"input", "LI", "NMAR"};
            for (const auto& m : c.methods)
                if (m == "PC" || m == "PC+SC") throw ConfigError("baseline runs the classical methods only");
            print_report(eval::run_experiment(c, paths.dataset(), {}, c.out_dir / "baseline"));
        } else if (evaluate->parsed()) {
            print_report(eval::evaluate_stage(c, paths));
        } else if (run->parsed()) {
            const auto r = eval::run_pipeline(c, paths);
            print_curve(r.pc);
            print_curve(r.sc);
            print_report(r.report);
        }
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
