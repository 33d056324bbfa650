#pragma once

#include "gaia/nn/layers.hpp"

namespace gaia::nn {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adam over one ParamStore. State is keyed by store order.
struct Adam {
    AdamConfig cfg;
    ParamStore* store = nullptr;
    std::vector<Arr> m, v;
    int64_t t = 0;

    Adam() = default;
    Adam(ParamStore& ps, AdamConfig c) : cfg(c), store(&ps) {
        for (auto& [name, p] : ps.params) {
            m.push_back(Arr::zeros(p.shape()));
            v.push_back(Arr::zeros(p.shape()));
        }
    }

    void step() {
        ++t;
        const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
        for (size_t i = 0; i < store->params.size(); ++i) {
            Var& p = store->params[i].second;
            if (!p.has_grad()) continue;
            const Arr& g = p.grad();
            Arr& mi = m[i];
            Arr& vi = v[i];
            Arr& val = p.value_mut();
            const int64_t n = val.numel();
            for (int64_t j = 0; j < n; ++j) {
                mi[j] = cfg.beta1 * mi[j] + (1.0 - cfg.beta1) * g[j];
                vi[j] = cfg.beta2 * vi[j] + (1.0 - cfg.beta2) * g[j] * g[j];
                const double mhat = mi[j] / bc1;
                const double vhat = vi[j] / bc2;
                val[j] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
            }
        }
    }
};

}  // namespace gaia::nn
