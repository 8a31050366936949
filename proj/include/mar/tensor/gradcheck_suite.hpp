#pragma once

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "mar/tensor/gradcheck.hpp"
#include "mar/tensor/ops.hpp"

namespace mar::ad {

struct SuiteEntry {
    std::string name;
    GradCheckResult result;
    double tolerance = 1e-4;
    bool passed() const { return result.max_rel_error <= tolerance; }
};

namespace detail {

inline Tensor<double> random_input(Shape shape, std::mt19937_64& rng, double lo, double hi, bool requires_grad = true) {
    std::uniform_real_distribution<double> d(lo, hi);
    std::vector<double> v(numel(shape));
    for (auto& x : v) x = d(rng);
    return Tensor<double>(std::move(shape), std::move(v), requires_grad);
}

// Random linear functional of y, so every output element contributes.
inline Tensor<double> probe(const Tensor<double>& y, const Tensor<double>& w) { return sum(mul(y, w)); }

}  // namespace detail

/// Finite-difference checks of every differentiable op, in double precision.
inline std::vector<SuiteEntry> gradcheck_suite(std::uint64_t seed = 1) {
    using detail::probe;
    using detail::random_input;
    std::mt19937_64 rng(seed);
    std::vector<SuiteEntry> out;
    auto run = [&](const std::string& name, const Shape& out_shape, auto fn, std::vector<Tensor<double>> inputs) {
        auto w = random_input(out_shape, rng, -1.0, 1.0, false);
        out.push_back({name, gradcheck([&] { return probe(fn(), w); }, std::move(inputs))});
    };

    {
        auto a = random_input({2, 3, 4}, rng, -1, 1), b = random_input({2, 3, 4}, rng, -1, 1);
        run("add", a.shape(), [&] { return add(a, b); }, {a, b});
        run("sub", a.shape(), [&] { return sub(a, b); }, {a, b});
        run("mul", a.shape(), [&] { return mul(a, b); }, {a, b});
        run("scale", a.shape(), [&] { return scale(a, 0.7); }, {a});
        run("square", a.shape(), [&] { return square(a); }, {a});
    }
    {
        // Magnitudes away from 0 so abs and the piecewise activations stay off their kinks.
        std::vector<double> v(24);
        std::uniform_real_distribution<double> d(0.1, 2.0);
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = (i % 2 ? 1.0 : -1.0) * d(rng);
        Tensor<double> x({24}, v, true);
        run("abs", x.shape(), [&] { return abs(x); }, {x});
        run("leaky_relu", x.shape(), [&] { return leaky_relu(x, 0.2); }, {x});
        run("relu", x.shape(), [&] { return relu(x); }, {x});
        run("tanh", x.shape(), [&] { return tanh(x); }, {x});
        run("sigmoid", x.shape(), [&] { return sigmoid(x); }, {x});
        out.push_back({"mean", gradcheck([&] { return mean(x); }, {x})});
    }
    {
        auto a = random_input({2, 2, 3, 3}, rng, -1, 1), b = random_input({2, 1, 3, 3}, rng, -1, 1);
        run("concat_channels", {2, 3, 3, 3}, [&] { return concat_channels(a, b); }, {a, b});
    }
    {
        const ConvSpec spec{2, 3, 4, 2, 1};
        auto x = random_input({2, 2, 8, 8}, rng, -1, 1), w = random_input({3, 2, 4, 4}, rng, -0.5, 0.5),
             b = random_input({3}, rng, -0.1, 0.1);
        run("conv2d", {2, 3, 4, 4}, [&] { return conv2d(x, spec, w, b); }, {x, w, b});
    }
    {
        const ConvSpec spec{3, 2, 4, 2, 1};
        auto x = random_input({2, 3, 3, 3}, rng, -1, 1), w = random_input({3, 2, 4, 4}, rng, -0.5, 0.5),
             b = random_input({2}, rng, -0.1, 0.1);
        run("conv_transpose2d", {2, 2, 6, 6}, [&] { return conv_transpose2d(x, spec, w, b); }, {x, w, b});
    }
    {
        auto x = random_input({1, 2, 7, 7}, rng, 0, 1);
        run("avg_pool2d", {1, 2, 4, 4}, [&] { return avg_pool2d(x, 3, 2, 1); }, {x});
    }
    return out;
}

}  // namespace mar::ad
