#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mar/core/error.hpp"
#include "mar/tensor/tensor.hpp"

namespace mar::ad {

struct AdamConfig {
    double lr = 5e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/**
 * Adam with bias correction. Moments are kept per parameter in double
 * precision regardless of the parameter type.
 */
template <typename T>
class Adam {
public:
    Adam(std::vector<Tensor<T>> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
        for (const auto& p : params_) {
            if (!p.requires_grad()) throw UsageError("Adam: parameter does not require grad");
            m_.emplace_back(p.size(), 0.0);
            v_.emplace_back(p.size(), 0.0);
        }
    }

    /// Applies one update from the accumulated gradients. Parameters without
    /// a gradient are treated as having a zero gradient.
    void step() {
        for (const auto& p : params_)
            for (T g : p.grad_view())
                if (!std::isfinite(g)) throw NumericalError("Adam: non-finite gradient");
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (std::size_t k = 0; k < params_.size(); ++k) {
            auto& p = params_[k];
            const auto grad = p.grad_view();
            auto& m = m_[k];
            auto& v = v_[k];
            p.update_values([&](std::span<T> values) {
                for (std::size_t i = 0; i < values.size(); ++i) {
                    const double g = grad.empty() ? 0.0 : static_cast<double>(grad[i]);
                    m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
                    v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
                    const double mhat = m[i] / bc1;
                    const double vhat = v[i] / bc2;
                    values[i] = static_cast<T>(static_cast<double>(values[i]) - cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps));
                }
            });
        }
    }

    void zero_grad() {
        for (auto& p : params_) p.zero_grad();
    }

    std::int64_t step_count() const noexcept { return t_; }
    const AdamConfig& config() const noexcept { return cfg_; }
    const std::vector<Tensor<T>>& params() const noexcept { return params_; }
    const std::vector<std::vector<double>>& first_moments() const noexcept { return m_; }
    const std::vector<std::vector<double>>& second_moments() const noexcept { return v_; }

    void restore(std::int64_t t, std::vector<std::vector<double>> m, std::vector<std::vector<double>> v) {
        if (m.size() != params_.size() || v.size() != params_.size())
            throw ConfigError("Adam: moment count does not match parameters");
        for (std::size_t k = 0; k < params_.size(); ++k)
            if (m[k].size() != params_[k].size() || v[k].size() != params_[k].size())
                throw ConfigError("Adam: moment shape mismatch for parameter " + std::to_string(k));
        t_ = t;
        m_ = std::move(m);
        v_ = std::move(v);
    }

private:
    std::vector<Tensor<T>> params_;
    AdamConfig cfg_;
    std::vector<std::vector<double>> m_, v_;
    std::int64_t t_ = 0;
};

}  // namespace mar::ad
