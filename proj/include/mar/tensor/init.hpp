#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "mar/tensor/tensor.hpp"

namespace mar::ad {

/// Zero-mean normal weights; identical seeds give bit-identical tensors.
template <typename T>
Tensor<T> normal_init(Shape shape, double stddev, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, stddev);
    std::vector<T> v(numel(shape));
    for (auto& x : v) x = static_cast<T>(dist(rng));
    return Tensor<T>(std::move(shape), std::move(v), true);
}

template <typename T>
Tensor<T> zeros_param(Shape shape) {
    return Tensor<T>::zeros(std::move(shape), true);
}

}  // namespace mar::ad
