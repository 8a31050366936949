#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "mar/tensor/tensor.hpp"

namespace mar::ad {

struct GradCheckResult {
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
    std::size_t checked = 0;
};

/**
 * Compares reverse-mode gradients of a scalar function against central
 * finite differences, perturbing every element of every input in place.
 *
 * The relative error of an element is |analytic - numeric| divided by
 * max(|analytic|, |numeric|, abs_floor).
 */
inline GradCheckResult gradcheck(const std::function<Tensor<double>()>& loss_fn, std::vector<Tensor<double>> inputs,
                                 double step = 1e-5, double abs_floor = 1e-6) {
    for (auto& in : inputs) in.zero_grad();
    backward(loss_fn());
    std::vector<std::vector<double>> analytic;
    for (auto& in : inputs) analytic.push_back(in.grad());

    GradCheckResult res;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        auto& in = inputs[k];
        for (std::size_t i = 0; i < in.size(); ++i) {
            const double orig = in[i];
            in.update_values([&](std::span<double> v) { v[i] = orig + step; });
            const double up = loss_fn().item();
            in.update_values([&](std::span<double> v) { v[i] = orig - step; });
            const double down = loss_fn().item();
            in.update_values([&](std::span<double> v) { v[i] = orig; });
            const double numeric = (up - down) / (2.0 * step);
            const double a = analytic[k][i];
            const double abs_err = std::abs(a - numeric);
            const double denom = std::max({std::abs(a), std::abs(numeric), abs_floor});
            res.max_abs_error = std::max(res.max_abs_error, abs_err);
            res.max_rel_error = std::max(res.max_rel_error, abs_err / denom);
            ++res.checked;
        }
    }
    for (auto& in : inputs) in.zero_grad();
    return res;
}

}  // namespace mar::ad
