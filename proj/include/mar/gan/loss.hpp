#pragma once

#include <string>
#include <vector>

#include "mar/core/error.hpp"
#include "mar/gan/config.hpp"
#include "mar/tensor/ops.hpp"

namespace mar::gan {

namespace detail {

template <typename T>
void require_binary(const ad::Tensor<T>& s, const char* op) {
    for (T v : s.data())
        if (v != T{0} && v != T{1}) throw UsageError(std::string(op) + ": mask is not binary");
}

/// out = s ? on : off, elementwise. Values are copied, so off-mask output is
/// bit-identical to `off`.
template <typename T>
ad::Tensor<T> select(const ad::Tensor<T>& s, const ad::Tensor<T>& on, const ad::Tensor<T>& off, const char* op) {
    if (on.shape() != off.shape() || s.shape() != off.shape())
        throw UsageError(std::string(op) + ": shape mismatch " + ad::to_string(s.shape()) + ", " +
                         ad::to_string(on.shape()) + ", " + ad::to_string(off.shape()));
    require_binary(s, op);
    std::vector<T> out(off.size());
    std::vector<bool> m(off.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        m[i] = s[i] != T{0};
        out[i] = m[i] ? on[i] : off[i];
    }
    return ad::Tensor<T>::make_result(off.shape(), std::move(out), {on, off}, [m = std::move(m)](ad::detail::Node<T>& n) {
        for (std::size_t k = 0; k < 2; ++k) {
            auto& p = *n.parents[k];
            if (!p.tracked) continue;
            auto& g = p.ensure_grad();
            const bool want = k == 0;
            for (std::size_t i = 0; i < g.size(); ++i)
                if (m[i] == want) g[i] += n.grad[i];
        }
    });
}

}  // namespace detail

/// ŷ = s ⊙ G(x) + (1 − s) ⊙ x
template <typename T>
ad::Tensor<T> compose_pc(const ad::Tensor<T>& x, const ad::Tensor<T>& s, const ad::Tensor<T>& gx) {
    return detail::select(s, gx, x, "compose_pc");
}

/// ŷ = s ⊙ (G(x) + x) + (1 − s) ⊙ x
template <typename T>
ad::Tensor<T> compose_sc(const ad::Tensor<T>& x, const ad::Tensor<T>& s, const ad::Tensor<T>& gx) {
    if (gx.shape() != x.shape()) throw UsageError("compose_sc: shape mismatch");
    return detail::select(s, ad::add(gx, x), x, "compose_sc");
}

/// mean |ŷ − y| over all elements.
template <typename T>
ad::Tensor<T> loss_content(const ad::Tensor<T>& y_hat, const ad::Tensor<T>& y, const ad::Tensor<T>& s) {
    if (y_hat.shape() != y.shape() || s.shape() != y.shape()) throw UsageError("loss_content: shape mismatch");
    return ad::mean(ad::abs(ad::sub(y_hat, y)));
}

/// mean((N ⊙ (1 − D(y)))²) + mean((N ⊙ D(ŷ))²)
template <typename T>
ad::Tensor<T> loss_disc(const ad::Tensor<T>& scores_real, const ad::Tensor<T>& scores_fake, const ad::Tensor<T>& ns) {
    if (scores_real.shape() != ns.shape() || scores_fake.shape() != ns.shape())
        throw UsageError("loss_disc: score maps " + ad::to_string(scores_real.shape()) + ", " +
                         ad::to_string(scores_fake.shape()) + " vs N(s) " + ad::to_string(ns.shape()));
    const auto real_term = ad::mean(ad::square(ad::mul(ns, ad::add_scalar(ad::scale(scores_real, T{-1}), T{1}))));
    const auto fake_term = ad::mean(ad::square(ad::mul(ns, scores_fake)));
    return ad::add(real_term, fake_term);
}

/// Adversarial generator term mean((N ⊙ (1 − D(ŷ)))²).
template <typename T>
ad::Tensor<T> loss_gen_adv(const ad::Tensor<T>& scores_fake, const ad::Tensor<T>& ns) {
    if (scores_fake.shape() != ns.shape()) throw UsageError("loss_gen: score map does not match N(s)");
    return ad::mean(ad::square(ad::mul(ns, ad::add_scalar(ad::scale(scores_fake, T{-1}), T{1}))));
}

/// L_GAN + λ L_c
template <typename T>
ad::Tensor<T> loss_gen(const ad::Tensor<T>& scores_fake, const ad::Tensor<T>& ns, const ad::Tensor<T>& content,
                       const LossWeights& w) {
    w.validate();
    if (content.size() != 1) throw UsageError("loss_gen: content loss must be a scalar");
    return ad::add(loss_gen_adv(scores_fake, ns), ad::scale(content, static_cast<T>(w.lambda)));
}

}  // namespace mar::gan
