#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "gaia/ndarray.hpp"

namespace gaia::nn {

// Define-by-run reverse-mode autodiff over double tensors. Each op returns a
// Var holding a value, its parents, and a closure that pushes the node's grad
// into the parents. backward() runs the closures in reverse topological order.
struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
    Arr value;
    Arr grad;                 // allocated on first accumulation
    bool requires_grad = false;
    bool has_grad = false;
    std::vector<NodePtr> parents;
    std::function<void(Node&)> backfn;  // null for leaves

    explicit Node(Arr v) : value(std::move(v)) {}

    Arr& ensure_grad() {
        if (!has_grad) {
            grad = Arr::zeros(value.shape);
            has_grad = true;
        }
        return grad;
    }
    void accumulate(const Arr& g) {
        Arr& dst = ensure_grad();
        const double* src = g.ptr();
        double* d = dst.ptr();
        const int64_t n = dst.numel();
        for (int64_t i = 0; i < n; ++i) d[i] += src[i];
    }
};

struct Var {
    NodePtr node;

    Var() = default;
    explicit Var(NodePtr n) : node(std::move(n)) {}

    static Var leaf(Arr v, bool requires_grad = false) {
        auto n = std::make_shared<Node>(std::move(v));
        n->requires_grad = requires_grad;
        return Var(n);
    }
    static Var scalar(double v, bool requires_grad = false) { return leaf(Arr::scalar(v), requires_grad); }

    bool defined() const { return node != nullptr; }
    const Arr& value() const { return node->value; }
    Arr& value_mut() { return node->value; }
    const Arr& grad() const { return node->grad; }
    bool has_grad() const { return node->has_grad; }
    const Shape& shape() const { return node->value.shape; }
    int64_t numel() const { return node->value.numel(); }
    bool requires_grad() const { return node->requires_grad; }
    double item() const { return node->value.data.at(0); }

    void zero_grad() {
        node->has_grad = false;
        node->grad = Arr();
    }
};

// Runs reverse-mode accumulation from `root` (seeded with d(root)/d(root) = 1;
// root must be scalar unless `seed` is given).
void backward(const Var& root);
void backward(const Var& root, const Arr& seed);

}  // namespace gaia::nn
