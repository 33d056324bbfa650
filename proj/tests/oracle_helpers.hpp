#pragma once

#include <cmath>
#include <functional>

#include "gaia/nn/ops.hpp"

namespace gaia::testing {

// Central-difference derivative of eval() w.r.t. storage[idx]. eval must be a
// deterministic function of the storage contents.
inline double central_diff(const std::function<double()>& eval, Arr& storage, int64_t idx, double h) {
    const double saved = storage[idx];
    storage[idx] = saved + h;
    const double fp = eval();
    storage[idx] = saved - h;
    const double fm = eval();
    storage[idx] = saved;
    return (fp - fm) / (2.0 * h);
}

inline double rel_err(double a, double b) {
    // Exact-zero gradients (e.g. shift-invariant softmax logit biases) read as
    // central-difference noise on the fd side; treat sub-1e-9 pairs as equal.
    if (std::abs(a) < 1e-9 && std::abs(b) < 1e-9) return 0.0;
    const double denom = std::max({std::abs(a), std::abs(b), 1e-6});
    return std::abs(a - b) / denom;
}

// Checks the analytic gradient of a scalar-valued graph builder against
// central differences on every element of every listed parameter.
// Returns the max relative error.
inline double gradcheck(const std::function<nn::Var()>& build, std::vector<nn::Var> params, double h = 1e-5) {
    for (auto& p : params) p.zero_grad();
    nn::Var loss = build();
    nn::backward(loss);
    double worst = 0.0;
    for (auto& p : params) {
        Arr analytic = p.has_grad() ? p.grad() : Arr::zeros(p.shape());
        for (int64_t i = 0; i < p.numel(); ++i) {
            const double fd = central_diff([&] { return build().item(); }, p.node->value, i, h);
            worst = std::max(worst, rel_err(analytic[i], fd));
        }
    }
    return worst;
}

}  // namespace gaia::testing
