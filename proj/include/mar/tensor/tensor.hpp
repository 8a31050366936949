#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "mar/core/error.hpp"

namespace mar::ad {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string to_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

namespace detail {

template <typename T>
struct Node {
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;  // empty until a gradient reaches this node
    bool requires_grad = false;  // leaf flag
    bool tracked = false;        // some gradient path reaches a requires_grad leaf
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    std::vector<T>& ensure_grad() {
        if (grad.empty()) grad.assign(value.size(), T{0});
        return grad;
    }
};

}  // namespace detail

/**
 * Dense row-major array with reverse-mode differentiation.
 *
 * A Tensor is a shared handle: copies alias the same storage. Values are not
 * modified after creation except through explicit update paths
 * (`update_values`, used by optimizers and deserialization).
 */
template <typename T>
class Tensor {
public:
    using value_type = T;
    using NodePtr = std::shared_ptr<detail::Node<T>>;

    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        std::vector<T> v(numel(shape), T{0});
        return Tensor(std::move(shape), std::move(v), requires_grad);
    }

    static Tensor full(Shape shape, T value, bool requires_grad = false) {
        std::vector<T> v(numel(shape), value);
        return Tensor(std::move(shape), std::move(v), requires_grad);
    }

    static Tensor scalar(T value) { return Tensor(Shape{}, std::vector<T>{value}); }

    Tensor(Shape shape, std::vector<T> values, bool requires_grad = false)
        : node_(std::make_shared<detail::Node<T>>()) {
        if (numel(shape) != values.size()) {
            throw ConfigError("tensor shape " + to_string(shape) + " holds " +
                              std::to_string(numel(shape)) + " values, got " +
                              std::to_string(values.size()));
        }
        node_->shape = std::move(shape);
        node_->value = std::move(values);
        node_->requires_grad = requires_grad;
        node_->tracked = requires_grad;
    }

    bool defined() const noexcept { return static_cast<bool>(node_); }
    const Shape& shape() const { return node_->shape; }
    std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t size() const { return node_->value.size(); }

    std::span<const T> data() const { return node_->value; }
    const T& operator[](std::size_t i) const { return node_->value[i]; }
    T item() const {
        if (size() != 1) throw UsageError("item() on tensor of shape " + to_string(shape()));
        return node_->value[0];
    }

    bool requires_grad() const { return node_->requires_grad; }
    bool tracked() const { return node_->tracked; }
    bool has_grad() const { return !node_->grad.empty(); }
    /// Gradient; all zeros when nothing has been accumulated yet.
    std::vector<T> grad() const {
        return has_grad() ? node_->grad : std::vector<T>(size(), T{0});
    }
    std::span<const T> grad_view() const { return node_->grad; }
    void zero_grad() { node_->grad.clear(); }

    /// In-place value update for parameters; never recorded in a graph.
    template <typename Fn>
    void update_values(Fn&& fn) {
        fn(std::span<T>(node_->value));
    }

    /// Same values, cut from the graph.
    Tensor detach() const {
        return Tensor(node_->shape, node_->value, false);
    }

    Tensor reshape(Shape shape) const;

    bool all_finite() const {
        for (const T& v : node_->value)
            if (!std::isfinite(v)) return false;
        return true;
    }

    const NodePtr& node() const { return node_; }

    /// Builds an op result. `backward` receives the result node and must
    /// accumulate into parents that are tracked.
    static Tensor make_result(Shape shape, std::vector<T> values, std::vector<Tensor> inputs,
                              std::function<void(detail::Node<T>&)> backward) {
        Tensor out(std::move(shape), std::move(values), false);
        bool any = false;
        for (const auto& in : inputs) any = any || in.tracked();
        if (any) {
            out.node_->tracked = true;
            for (auto& in : inputs) out.node_->parents.push_back(in.node_);
            out.node_->backward_fn = std::move(backward);
        }
        return out;
    }

private:
    NodePtr node_;
};

template <typename T>
Tensor<T> Tensor<T>::reshape(Shape shape) const {
    if (numel(shape) != size())
        throw ConfigError("cannot reshape " + to_string(this->shape()) + " to " + to_string(shape));
    auto self = *this;
    return make_result(std::move(shape), node_->value, {self}, [](detail::Node<T>& out) {
        auto& p = *out.parents[0];
        if (!p.tracked) return;
        auto& g = p.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += out.grad[i];
    });
}

/**
 * Reverse-mode sweep from a scalar loss. Gradients accumulate into
 * requires_grad leaves; interior nodes release their graph links afterwards,
 * so a second call on the same loss is a usage error.
 */
template <typename T>
void backward(const Tensor<T>& loss) {
    if (loss.size() != 1) throw UsageError("backward() needs a scalar loss, got shape " + to_string(loss.shape()));
    if (!loss.tracked()) return;
    using Node = detail::Node<T>;
    auto* root = loss.node().get();
    if (!root->backward_fn && !root->requires_grad)
        throw UsageError("backward() called on a consumed graph");

    // Iterative post-order DFS for a topological order.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack{{root, 0}};
    seen.insert(root);
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* parent = node->parents[next++].get();
            if (parent->tracked && seen.insert(parent).second) stack.emplace_back(parent, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root->ensure_grad()[0] += T{1};
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
    }
    for (Node* node : order) {
        if (node->requires_grad) continue;
        node->backward_fn = nullptr;
        node->parents.clear();
        node->grad.clear();
        node->grad.shrink_to_fit();
    }
}

}  // namespace mar::ad
