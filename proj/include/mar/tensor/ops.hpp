#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "mar/core/error.hpp"
#include "mar/tensor/gemm.hpp"
#include "mar/tensor/tensor.hpp"

namespace mar::ad {

struct ConvSpec {
    std::size_t in_channels = 1;
    std::size_t out_channels = 1;
    std::size_t kernel = 3;
    std::size_t stride = 1;
    std::size_t padding = 0;

    friend bool operator==(const ConvSpec&, const ConvSpec&) = default;
};

/// floor((extent + 2p - k) / s) + 1; throws when the window does not fit.
inline std::size_t conv_output_extent(std::size_t extent, std::size_t k, std::size_t s, std::size_t p) {
    if (k == 0 || s == 0) throw ConfigError("kernel and stride must be positive");
    if (extent + 2 * p < k) {
        throw ConfigError("input extent " + std::to_string(extent) + " with padding " + std::to_string(p) +
                          " is smaller than kernel " + std::to_string(k));
    }
    return (extent + 2 * p - k) / s + 1;
}

inline std::size_t conv_transpose_output_extent(std::size_t extent, std::size_t k, std::size_t s, std::size_t p) {
    if (extent == 0) throw ConfigError("empty input to transposed convolution");
    const std::size_t full = (extent - 1) * s + k;
    if (full <= 2 * p) throw ConfigError("transposed convolution output would be empty");
    return full - 2 * p;
}

namespace detail {

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.shape() != b.shape())
        throw UsageError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
}

template <typename T>
void require_rank4(const Tensor<T>& t, const char* op) {
    if (t.rank() != 4) throw ConfigError(std::string(op) + ": expected NCHW input, got " + to_string(t.shape()));
}

template <typename T, typename Fwd, typename Deriv>
Tensor<T> unary(const Tensor<T>& a, Fwd fwd, Deriv deriv) {
    std::vector<T> out(a.size());
    const auto in = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(in[i]);
    return Tensor<T>::make_result(a.shape(), std::move(out), {a}, [deriv](Node<T>& n) {
        auto& p = *n.parents[0];
        auto& g = p.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * deriv(p.value[i], n.value[i]);
    });
}

// Gathers k x k patches: dst[(c*k + ki)*k + kj][n*Ho*Wo + oh*Wo + ow].
template <typename T>
void im2col(const T* src, std::size_t n_batch, std::size_t channels, std::size_t h, std::size_t w, std::size_t k,
            std::size_t s, std::size_t p, std::size_t ho, std::size_t wo, T* dst) {
    const std::size_t cols = n_batch * ho * wo;
    for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t ki = 0; ki < k; ++ki) {
            for (std::size_t kj = 0; kj < k; ++kj) {
                T* row = dst + ((c * k + ki) * k + kj) * cols;
                for (std::size_t n = 0; n < n_batch; ++n) {
                    const T* plane = src + (n * channels + c) * h * w;
                    T* out = row + n * ho * wo;
                    for (std::size_t oh = 0; oh < ho; ++oh) {
                        const long ih = static_cast<long>(oh * s + ki) - static_cast<long>(p);
                        T* out_row = out + oh * wo;
                        if (ih < 0 || ih >= static_cast<long>(h)) {
                            std::fill(out_row, out_row + wo, T{0});
                            continue;
                        }
                        const T* in_row = plane + static_cast<std::size_t>(ih) * w;
                        for (std::size_t ow = 0; ow < wo; ++ow) {
                            const long iw = static_cast<long>(ow * s + kj) - static_cast<long>(p);
                            out_row[ow] = (iw < 0 || iw >= static_cast<long>(w)) ? T{0} : in_row[iw];
                        }
                    }
                }
            }
        }
    }
}

// Adjoint of im2col: scatters (accumulates) patches back into dst.
template <typename T>
void col2im(const T* src, std::size_t n_batch, std::size_t channels, std::size_t h, std::size_t w, std::size_t k,
            std::size_t s, std::size_t p, std::size_t ho, std::size_t wo, T* dst) {
    const std::size_t cols = n_batch * ho * wo;
    for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t ki = 0; ki < k; ++ki) {
            for (std::size_t kj = 0; kj < k; ++kj) {
                const T* row = src + ((c * k + ki) * k + kj) * cols;
                for (std::size_t n = 0; n < n_batch; ++n) {
                    T* plane = dst + (n * channels + c) * h * w;
                    const T* in = row + n * ho * wo;
                    for (std::size_t oh = 0; oh < ho; ++oh) {
                        const long ih = static_cast<long>(oh * s + ki) - static_cast<long>(p);
                        if (ih < 0 || ih >= static_cast<long>(h)) continue;
                        T* out_row = plane + static_cast<std::size_t>(ih) * w;
                        const T* in_row = in + oh * wo;
                        for (std::size_t ow = 0; ow < wo; ++ow) {
                            const long iw = static_cast<long>(ow * s + kj) - static_cast<long>(p);
                            if (iw >= 0 && iw < static_cast<long>(w)) out_row[iw] += in_row[ow];
                        }
                    }
                }
            }
        }
    }
}

// [N, C, L] <-> [C, N, L]
template <typename T>
void swap_batch_channel(const T* src, std::size_t a, std::size_t b, std::size_t len, T* dst) {
    for (std::size_t i = 0; i < a; ++i)
        for (std::size_t j = 0; j < b; ++j)
            std::copy_n(src + (i * b + j) * len, len, dst + (j * a + i) * len);
}

}  // namespace detail

// ---- elementwise -----------------------------------------------------------

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    detail::require_same_shape(a, b, "add");
    std::vector<T> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
    return Tensor<T>::make_result(a.shape(), std::move(out), {a, b}, [](detail::Node<T>& n) {
        for (auto& p : n.parents) {
            if (!p->tracked) continue;
            auto& g = p->ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
        }
    });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    detail::require_same_shape(a, b, "sub");
    std::vector<T> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
    return Tensor<T>::make_result(a.shape(), std::move(out), {a, b}, [](detail::Node<T>& n) {
        const T sign[2] = {T{1}, T{-1}};
        for (std::size_t k = 0; k < 2; ++k) {
            auto& p = *n.parents[k];
            if (!p.tracked) continue;
            auto& g = p.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += sign[k] * n.grad[i];
        }
    });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    detail::require_same_shape(a, b, "mul");
    std::vector<T> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
    return Tensor<T>::make_result(a.shape(), std::move(out), {a, b}, [](detail::Node<T>& n) {
        auto& pa = *n.parents[0];
        auto& pb = *n.parents[1];
        if (pa.tracked) {
            auto& g = pa.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * pb.value[i];
        }
        if (pb.tracked) {
            auto& g = pb.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * pa.value[i];
        }
    });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T c) {
    return detail::unary(a, [c](T x) { return c * x; }, [c](T, T) { return c; });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T c) {
    return detail::unary(a, [c](T x) { return x + c; }, [](T, T) { return T{1}; });
}

template <typename T>
Tensor<T> abs(const Tensor<T>& a) {
    return detail::unary(
        a, [](T x) { return std::abs(x); },
        [](T x, T) { return x > T{0} ? T{1} : (x < T{0} ? T{-1} : T{0}); });
}

template <typename T>
Tensor<T> square(const Tensor<T>& a) {
    return detail::unary(a, [](T x) { return x * x; }, [](T x, T) { return T{2} * x; });
}

// ---- reductions ------------------------------------------------------------

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
    T total{0};
    for (T v : a.data()) total += v;
    return Tensor<T>::make_result(Shape{}, {total}, {a}, [](detail::Node<T>& n) {
        auto& g = n.parents[0]->ensure_grad();
        for (auto& v : g) v += n.grad[0];
    });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
    if (a.size() == 0) throw UsageError("mean of empty tensor");
    return scale(sum(a), T{1} / static_cast<T>(a.size()));
}

// ---- activations -----------------------------------------------------------

enum class ActivationKind { identity, leaky_relu, relu, tanh, sigmoid };

struct Activation {
    ActivationKind kind = ActivationKind::identity;
    double slope = 0.2;  // leaky_relu only
};

template <typename T>
Tensor<T> activation(const Tensor<T>& a, Activation act) {
    switch (act.kind) {
        case ActivationKind::identity:
            return a;
        case ActivationKind::leaky_relu: {
            const T slope = static_cast<T>(act.slope);
            return detail::unary(
                a, [slope](T x) { return x > T{0} ? x : slope * x; },
                [slope](T x, T) { return x > T{0} ? T{1} : slope; });
        }
        case ActivationKind::relu:
            return detail::unary(
                a, [](T x) { return x > T{0} ? x : T{0}; }, [](T x, T) { return x > T{0} ? T{1} : T{0}; });
        case ActivationKind::tanh:
            return detail::unary(
                a, [](T x) { return std::tanh(x); }, [](T, T y) { return T{1} - y * y; });
        case ActivationKind::sigmoid:
            return detail::unary(
                a, [](T x) { return T{1} / (T{1} + std::exp(-x)); }, [](T, T y) { return y * (T{1} - y); });
    }
    throw ConfigError("unknown activation");
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& a, double slope = 0.2) {
    return activation(a, {ActivationKind::leaky_relu, slope});
}
template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
    return activation(a, {ActivationKind::relu});
}
template <typename T>
Tensor<T> tanh(const Tensor<T>& a) {
    return activation(a, {ActivationKind::tanh});
}
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
    return activation(a, {ActivationKind::sigmoid});
}

// ---- structure -------------------------------------------------------------

/// Concatenates two NCHW tensors along the channel axis.
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
    detail::require_rank4(a, "concat_channels");
    detail::require_rank4(b, "concat_channels");
    const auto n = a.dim(0), ca = a.dim(1), cb = b.dim(1), hw = a.dim(2) * a.dim(3);
    if (b.dim(0) != n || b.dim(2) != a.dim(2) || b.dim(3) != a.dim(3))
        throw ConfigError("concat_channels: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
    std::vector<T> out(n * (ca + cb) * hw);
    for (std::size_t i = 0; i < n; ++i) {
        std::copy_n(a.data().data() + i * ca * hw, ca * hw, out.data() + i * (ca + cb) * hw);
        std::copy_n(b.data().data() + i * cb * hw, cb * hw, out.data() + (i * (ca + cb) + ca) * hw);
    }
    return Tensor<T>::make_result(Shape{n, ca + cb, a.dim(2), a.dim(3)}, std::move(out), {a, b},
                                  [n, ca, cb, hw](detail::Node<T>& node) {
                                      const std::size_t offs[2] = {0, ca};
                                      const std::size_t chans[2] = {ca, cb};
                                      for (std::size_t k = 0; k < 2; ++k) {
                                          auto& p = *node.parents[k];
                                          if (!p.tracked) continue;
                                          auto& g = p.ensure_grad();
                                          for (std::size_t i = 0; i < n; ++i) {
                                              const T* src = node.grad.data() + (i * (ca + cb) + offs[k]) * hw;
                                              T* dst = g.data() + i * chans[k] * hw;
                                              for (std::size_t j = 0; j < chans[k] * hw; ++j) dst[j] += src[j];
                                          }
                                      }
                                  });
}

// ---- convolution -----------------------------------------------------------

/**
 * 2-D cross-correlation. input [N,C,H,W], weight [O,C,k,k], bias [O].
 */
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const ConvSpec& spec, const Tensor<T>& weight, const Tensor<T>& bias) {
    detail::require_rank4(input, "conv2d");
    const auto n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
    const auto o = spec.out_channels, k = spec.kernel, s = spec.stride, p = spec.padding;
    if (c != spec.in_channels)
        throw ConfigError("conv2d: input has " + std::to_string(c) + " channels, spec expects " +
                          std::to_string(spec.in_channels));
    if (weight.shape() != Shape{o, c, k, k})
        throw ConfigError("conv2d: weight shape " + to_string(weight.shape()) + ", expected " +
                          to_string(Shape{o, c, k, k}));
    if (bias.shape() != Shape{o}) throw ConfigError("conv2d: bias shape " + to_string(bias.shape()));
    const auto ho = conv_output_extent(h, k, s, p), wo = conv_output_extent(w, k, s, p);
    const std::size_t rows = c * k * k, cols = n * ho * wo, plane = ho * wo;

    std::vector<T> patches(rows * cols);
    detail::im2col(input.data().data(), n, c, h, w, k, s, p, ho, wo, patches.data());
    std::vector<T> tmp(o * cols);
    detail::gemm<T>(false, false, static_cast<int>(o), static_cast<int>(cols), static_cast<int>(rows), T{1},
                    weight.data().data(), static_cast<int>(rows), patches.data(), static_cast<int>(cols), T{0},
                    tmp.data(), static_cast<int>(cols));
    std::vector<T> out(n * o * plane);
    detail::swap_batch_channel(tmp.data(), o, n, plane, out.data());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < o; ++j) {
            T* dst = out.data() + (i * o + j) * plane;
            const T b = bias[j];
            for (std::size_t q = 0; q < plane; ++q) dst[q] += b;
        }

    const bool need_patches = weight.tracked();
    if (!need_patches) patches.clear();
    return Tensor<T>::make_result(
        Shape{n, o, ho, wo}, std::move(out), {input, weight, bias},
        [=, patches = std::move(patches)](detail::Node<T>& node) {
            auto& pin = *node.parents[0];
            auto& pw = *node.parents[1];
            auto& pb = *node.parents[2];
            std::vector<T> dtmp(o * cols);
            detail::swap_batch_channel(node.grad.data(), n, o, plane, dtmp.data());
            if (pb.tracked) {
                auto& g = pb.ensure_grad();
                for (std::size_t j = 0; j < o; ++j) {
                    T acc{0};
                    const T* row = dtmp.data() + j * cols;
                    for (std::size_t q = 0; q < cols; ++q) acc += row[q];
                    g[j] += acc;
                }
            }
            if (pw.tracked) {
                auto& g = pw.ensure_grad();
                detail::gemm<T>(false, true, static_cast<int>(o), static_cast<int>(rows), static_cast<int>(cols),
                                T{1}, dtmp.data(), static_cast<int>(cols), patches.data(), static_cast<int>(cols),
                                T{1}, g.data(), static_cast<int>(rows));
            }
            if (pin.tracked) {
                std::vector<T> dpatches(rows * cols);
                detail::gemm<T>(true, false, static_cast<int>(rows), static_cast<int>(cols), static_cast<int>(o),
                                T{1}, pw.value.data(), static_cast<int>(rows), dtmp.data(), static_cast<int>(cols),
                                T{0}, dpatches.data(), static_cast<int>(cols));
                auto& g = pin.ensure_grad();
                detail::col2im(dpatches.data(), n, c, h, w, k, s, p, ho, wo, g.data());
            }
        });
}

/**
 * Transposed convolution, the adjoint of conv2d's linear part.
 * input [N,Cin,H,W], weight [Cin,Cout,k,k], bias [Cout];
 * output extent (H-1)*s - 2p + k. spec.in_channels = Cin, spec.out_channels = Cout.
 */
template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& input, const ConvSpec& spec, const Tensor<T>& weight,
                           const Tensor<T>& bias) {
    detail::require_rank4(input, "conv_transpose2d");
    const auto n = input.dim(0), ci = input.dim(1), h = input.dim(2), w = input.dim(3);
    const auto co = spec.out_channels, k = spec.kernel, s = spec.stride, p = spec.padding;
    if (ci != spec.in_channels)
        throw ConfigError("conv_transpose2d: input has " + std::to_string(ci) + " channels, spec expects " +
                          std::to_string(spec.in_channels));
    if (weight.shape() != Shape{ci, co, k, k})
        throw ConfigError("conv_transpose2d: weight shape " + to_string(weight.shape()) + ", expected " +
                          to_string(Shape{ci, co, k, k}));
    if (bias.shape() != Shape{co}) throw ConfigError("conv_transpose2d: bias shape " + to_string(bias.shape()));
    if (s == 0 || k == 0) throw ConfigError("conv_transpose2d: kernel and stride must be positive");
    const auto ho = conv_transpose_output_extent(h, k, s, p), wo = conv_transpose_output_extent(w, k, s, p);
    // The matching forward convolution maps [ho,wo] back onto [h,w].
    if (conv_output_extent(ho, k, s, p) != h || conv_output_extent(wo, k, s, p) != w)
        throw ConfigError("conv_transpose2d: geometry is not invertible for this input size");
    const std::size_t rows = co * k * k, cols = n * h * w, plane = h * w, out_plane = ho * wo;

    std::vector<T> xin(ci * cols);
    detail::swap_batch_channel(input.data().data(), n, ci, plane, xin.data());
    std::vector<T> patches(rows * cols);
    detail::gemm<T>(true, false, static_cast<int>(rows), static_cast<int>(cols), static_cast<int>(ci), T{1},
                    weight.data().data(), static_cast<int>(rows), xin.data(), static_cast<int>(cols), T{0},
                    patches.data(), static_cast<int>(cols));
    std::vector<T> out(n * co * out_plane, T{0});
    detail::col2im(patches.data(), n, co, ho, wo, k, s, p, h, w, out.data());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < co; ++j) {
            T* dst = out.data() + (i * co + j) * out_plane;
            const T b = bias[j];
            for (std::size_t q = 0; q < out_plane; ++q) dst[q] += b;
        }

    if (!weight.tracked()) xin.clear();
    return Tensor<T>::make_result(
        Shape{n, co, ho, wo}, std::move(out), {input, weight, bias},
        [=, xin = std::move(xin)](detail::Node<T>& node) {
            auto& pin = *node.parents[0];
            auto& pw = *node.parents[1];
            auto& pb = *node.parents[2];
            if (pb.tracked) {
                auto& g = pb.ensure_grad();
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < co; ++j) {
                        const T* src = node.grad.data() + (i * co + j) * out_plane;
                        T acc{0};
                        for (std::size_t q = 0; q < out_plane; ++q) acc += src[q];
                        g[j] += acc;
                    }
            }
            if (!pin.tracked && !pw.tracked) return;
            std::vector<T> dpatches(rows * cols);
            detail::im2col(node.grad.data(), n, co, ho, wo, k, s, p, h, w, dpatches.data());
            if (pw.tracked) {
                auto& g = pw.ensure_grad();
                detail::gemm<T>(false, true, static_cast<int>(ci), static_cast<int>(rows), static_cast<int>(cols),
                                T{1}, xin.data(), static_cast<int>(cols), dpatches.data(), static_cast<int>(cols),
                                T{1}, g.data(), static_cast<int>(rows));
            }
            if (pin.tracked) {
                std::vector<T> dx(ci * cols);
                detail::gemm<T>(false, false, static_cast<int>(ci), static_cast<int>(cols), static_cast<int>(rows),
                                T{1}, pw.value.data(), static_cast<int>(rows), dpatches.data(),
                                static_cast<int>(cols), T{0}, dx.data(), static_cast<int>(cols));
                auto& g = pin.ensure_grad();
                std::vector<T> back(n * ci * plane);
                detail::swap_batch_channel(dx.data(), ci, n, plane, back.data());
                for (std::size_t q = 0; q < back.size(); ++q) g[q] += back[q];
            }
        });
}

/**
 * Average pooling with zero padding; the divisor is always k*k, so windows
 * overlapping the border are attenuated.
 */
template <typename T>
Tensor<T> avg_pool2d(const Tensor<T>& input, std::size_t k, std::size_t s, std::size_t p) {
    detail::require_rank4(input, "avg_pool2d");
    const auto n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
    const auto ho = conv_output_extent(h, k, s, p), wo = conv_output_extent(w, k, s, p);
    const T inv = T{1} / static_cast<T>(k * k);
    std::vector<T> out(n * c * ho * wo, T{0});
    auto visit = [=](auto&& fn) {
        for (std::size_t plane = 0; plane < n * c; ++plane)
            for (std::size_t oh = 0; oh < ho; ++oh)
                for (std::size_t ow = 0; ow < wo; ++ow)
                    for (std::size_t ki = 0; ki < k; ++ki) {
                        const long ih = static_cast<long>(oh * s + ki) - static_cast<long>(p);
                        if (ih < 0 || ih >= static_cast<long>(h)) continue;
                        for (std::size_t kj = 0; kj < k; ++kj) {
                            const long iw = static_cast<long>(ow * s + kj) - static_cast<long>(p);
                            if (iw < 0 || iw >= static_cast<long>(w)) continue;
                            fn((plane * ho + oh) * wo + ow, (plane * h + static_cast<std::size_t>(ih)) * w +
                                                                static_cast<std::size_t>(iw));
                        }
                    }
    };
    const auto in = input.data();
    visit([&](std::size_t o_idx, std::size_t i_idx) { out[o_idx] += in[i_idx]; });
    for (auto& v : out) v *= inv;
    return Tensor<T>::make_result(Shape{n, c, ho, wo}, std::move(out), {input}, [=](detail::Node<T>& node) {
        auto& g = node.parents[0]->ensure_grad();
        visit([&](std::size_t o_idx, std::size_t i_idx) { g[i_idx] += node.grad[o_idx] * inv; });
    });
}

}  // namespace mar::ad
