#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "mar/core/error.hpp"
#include "mar/core/random.hpp"
#include "mar/gan/bundle.hpp"
#include "mar/gan/loss.hpp"
#include "mar/gan/model.hpp"
#include "mar/gan/sample.hpp"
#include "mar/tensor/adam.hpp"
#include "mar/tensor/marf.hpp"

namespace mar::gan {

struct LossRecord {
    std::size_t iter = 0;
    double loss_d = 0.0;
    double loss_g_adv = 0.0;
    double loss_g_content = 0.0;
};

struct TrainHyper {
    ad::AdamConfig adam{5e-4, 0.5, 0.999, 1e-8};
    LossWeights weights{100.0};
    std::size_t batch = 16;
    std::size_t iterations = 0;
    std::uint64_t seed = 0;
    Augment augment = Augment::none;
    // Model selection: with validation pairs and validate_every > 0 the
    // returned model is the iterate (0 included) with the lowest masked RMSE.
    std::vector<TrainingSample> validation;
    std::size_t validate_every = 0;
    std::filesystem::path checkpoint_dir;  // empty: no files written
    std::size_t checkpoint_every = 0;      // 0: only at the end
    std::function<void(const LossRecord&)> on_iteration;
};

struct ValidationRecord {
    std::size_t iter = 0;
    double rmse = 0.0;
};

struct TrainResult {
    ModelBundle bundle;
    std::vector<LossRecord> curve;
    std::vector<ValidationRecord> validation;
    std::size_t selected = 0;  // iteration of the returned weights
};

/// Generator forward plus the stage's composition, without gradient tracking.
inline ad::Tensor<float> complete(const ModelBundle& b, const ad::Tensor<float>& x, const ad::Tensor<float>& s) {
    const auto gx = forward_generator(x, s, b.gen_cfg, b.gen.frozen());
    return b.stage == Stage::pc ? compose_pc(x, s, gx) : compose_sc(x, s, gx);
}

namespace detail {

/// Sum of |ŷ − y|^p over masked pixels, and their count.
inline std::pair<double, std::size_t> masked_error(const ModelBundle& b, const std::vector<TrainingSample>& data, int p,
                                                   std::size_t batch) {
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t start = 0; start < data.size(); start += batch) {
        std::vector<std::size_t> idx;
        for (std::size_t i = start; i < std::min(start + batch, data.size()); ++i) idx.push_back(i);
        const auto bt = make_batch(data, idx);
        const auto y_hat = complete(b, bt.x, bt.s);
        for (std::size_t i = 0; i < y_hat.size(); ++i)
            if (bt.s[i] != 0.0f) {
                const double e = std::abs(static_cast<double>(y_hat[i]) - static_cast<double>(bt.y[i]));
                total += p == 1 ? e : e * e;
                ++count;
            }
    }
    return {total, count};
}

}  // namespace detail

/// Mean |ŷ − y| over masked pixels of the whole dataset (0 if nothing is masked).
inline double evaluate_masked_l1(const ModelBundle& b, const std::vector<TrainingSample>& data, std::size_t batch = 16) {
    const auto [total, count] = detail::masked_error(b, data, 1, batch);
    return count ? total / static_cast<double>(count) : 0.0;
}

inline double evaluate_masked_rmse(const ModelBundle& b, const std::vector<TrainingSample>& data, std::size_t batch = 16) {
    const auto [total, count] = detail::masked_error(b, data, 2, batch);
    return count ? std::sqrt(total / static_cast<double>(count)) : 0.0;
}

inline void write_loss_csv(const std::filesystem::path& path, const std::vector<LossRecord>& curve) {
    std::string out = "iter,loss_d,loss_g_adv,loss_g_content\n";
    char line[160];
    for (const auto& r : curve) {
        std::snprintf(line, sizeof line, "%zu,%.9g,%.9g,%.9g\n", r.iter, r.loss_d, r.loss_g_adv, r.loss_g_content);
        out += line;
    }
    marf::write_file_atomic(path, out);
}

/**
 * Alternating LSGAN training: one discriminator step on (y, ŷ) then one
 * generator step on the adversarial term plus λ times the content loss.
 * Batches are drawn with replacement from a counter-based stream, so the run
 * is a pure function of the initial bundle, the data and `h.seed`.
 *
 * A non-finite loss or gradient restores the parameters of the last
 * completed iteration, writes them to `checkpoint_dir/last_good` with a
 * diagnostics file (when a directory is set), and throws NumericalError.
 */
inline TrainResult train(ModelBundle bundle, const std::vector<TrainingSample>& data, const TrainHyper& h) {
    if (data.empty()) throw UsageError("train: empty dataset");
    if (h.batch == 0) throw ConfigError("train: batch size must be positive");
    h.weights.validate();
    for (const auto& t : data) t.validate();
    for (const auto& t : h.validation) t.validate();
    bundle.weights = h.weights;

    TrainResult res;
    ad::Adam<float> opt_g(bundle.gen.tensors, h.adam);
    ad::Adam<float> opt_d(bundle.disc.tensors, h.adam);
    const bool residual = bundle.stage == Stage::sc;

    auto fail = [&](std::size_t iter, const std::string& why, const std::vector<std::vector<float>>& g_good,
                    const std::vector<std::vector<float>>& d_good) {
        bundle.gen.restore(g_good);
        bundle.disc.restore(d_good);
        if (!h.checkpoint_dir.empty()) {
            save_bundle(bundle, h.checkpoint_dir / "last_good");
            write_loss_csv(h.checkpoint_dir / "loss_curve.csv", res.curve);
            marf::write_file_atomic(h.checkpoint_dir / "diagnostics.txt",
                                    "iteration " + std::to_string(iter) + ": " + why + "\n");
        }
        throw NumericalError("training diverged at iteration " + std::to_string(iter) + ": " + why);
    };

    const bool selecting = !h.validation.empty() && h.validate_every > 0;
    std::vector<std::vector<float>> best_g, best_d;
    double best = 0.0;
    auto validate = [&] {
        const double v = evaluate_masked_rmse(bundle, h.validation, h.batch);
        res.validation.push_back({bundle.iterations, v});
        if (res.validation.size() == 1 || v < best) {
            best = v;
            best_g = bundle.gen.snapshot();
            best_d = bundle.disc.snapshot();
            res.selected = bundle.iterations;
        }
    };
    if (selecting) validate();

    for (std::size_t it = 0; it < h.iterations; ++it) {
        const auto g_good = bundle.gen.snapshot();
        const auto d_good = bundle.disc.snapshot();

        CounterRng rng(derive_seed(h.seed, 0xba7c, it));
        std::vector<std::size_t> idx(h.batch);
        for (auto& i : idx) i = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(data.size()) - 1));
        Batch bt;
        if (h.augment == Augment::none) {
            bt = make_batch(data, idx);
        } else {
            std::vector<TrainingSample> picked;
            picked.reserve(idx.size());
            for (const auto i : idx) picked.push_back(augmented(data[i], h.augment, rng));
            std::vector<std::size_t> all(picked.size());
            for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
            bt = make_batch(picked, all);
        }
        const auto ns = modulation_map(bt.s, bundle.disc_cfg);

        const auto gx = forward_generator(bt.x, bt.s, bundle.gen_cfg, bundle.gen);
        const auto y_hat = residual ? compose_sc(bt.x, bt.s, gx) : compose_pc(bt.x, bt.s, gx);

        LossRecord rec{it + 1, 0.0, 0.0, 0.0};
        try {
            // Discriminator step.
            const auto ld = loss_disc(forward_discriminator(bt.y, bundle.disc_cfg, bundle.disc),
                                      forward_discriminator(y_hat.detach(), bundle.disc_cfg, bundle.disc), ns);
            rec.loss_d = ld.item();
            if (!std::isfinite(rec.loss_d)) fail(it + 1, "non-finite discriminator loss", g_good, d_good);
            opt_d.zero_grad();
            ad::backward(ld);
            opt_d.step();

            // Generator step against the updated discriminator, held fixed.
            const auto adv = loss_gen_adv(forward_discriminator(y_hat, bundle.disc_cfg, bundle.disc.frozen()), ns);
            const auto content = loss_content(y_hat, bt.y, bt.s);
            rec.loss_g_adv = adv.item();
            rec.loss_g_content = content.item();
            const auto lg = ad::add(adv, ad::scale(content, static_cast<float>(h.weights.lambda)));
            if (!std::isfinite(lg.item())) fail(it + 1, "non-finite generator loss", g_good, d_good);
            opt_g.zero_grad();
            ad::backward(lg);
            opt_g.step();
        } catch (const NumericalError& e) {
            if (std::string(e.what()).rfind("training diverged", 0) == 0) throw;
            fail(it + 1, e.what(), g_good, d_good);
        }
        bundle.iterations += 1;
        res.curve.push_back(rec);
        if (h.on_iteration) h.on_iteration(rec);
        if (!h.checkpoint_dir.empty() && h.checkpoint_every && bundle.iterations % h.checkpoint_every == 0)
            save_bundle(bundle, h.checkpoint_dir / "checkpoint");
        if (selecting && (bundle.iterations % h.validate_every == 0 || it + 1 == h.iterations)) validate();
    }
    if (selecting) {
        bundle.gen.restore(best_g);
        bundle.disc.restore(best_d);
        bundle.iterations = res.selected;
    } else {
        res.selected = bundle.iterations;
    }
    if (!h.checkpoint_dir.empty()) {
        save_bundle(bundle, h.checkpoint_dir / "final");
        write_loss_csv(h.checkpoint_dir / "loss_curve.csv", res.curve);
        if (selecting) {
            std::string v = "iter,rmse\n";
            char buf[64];
            for (const auto& r : res.validation) {
                std::snprintf(buf, sizeof buf, "%zu,%.9g\n", r.iter, r.rmse);
                v += buf;
            }
            marf::write_file_atomic(h.checkpoint_dir / "validation.csv", v);
        }
    }
    res.bundle = std::move(bundle);
    return res;
}

inline TrainResult train_pc(const std::vector<TrainingSample>& data, const GeneratorConfig& g, const DiscriminatorConfig& d,
                            const Normalization& norm, const TrainHyper& h) {
    return train(ModelBundle::initialize(Stage::pc, g, d, norm, h.seed), data, h);
}

/// Residual stage: the generator's last layer starts at zero, so ŷ == x initially.
inline TrainResult train_sc(const std::vector<TrainingSample>& data, const GeneratorConfig& g, const DiscriminatorConfig& d,
                            const Normalization& norm, const TrainHyper& h) {
    return train(ModelBundle::initialize(Stage::sc, g, d, norm, h.seed), data, h);
}

}  // namespace mar::gan
