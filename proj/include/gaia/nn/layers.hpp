#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "gaia/nn/ops.hpp"

namespace gaia::nn {

// Named parameter registry. Every trainable Var of a net lives here, in
// creation order, which fixes the optimizer state layout and the checkpoint
// blob layout.
struct ParamStore {
    std::vector<std::pair<std::string, Var>> params;
    std::mt19937_64 rng;

    explicit ParamStore(uint64_t seed = 0x9e3779b97f4a7c15ull) : rng(seed) {}

    Var add(const std::string& name, Arr init) {
        Var v = Var::leaf(std::move(init), true);
        params.emplace_back(name, v);
        return v;
    }

    Var add_randn(const std::string& name, Shape shape, double stddev) {
        return add(name, randn(std::move(shape), rng, stddev));
    }

    Var add_zeros(const std::string& name, Shape shape) { return add(name, Arr::zeros(std::move(shape))); }
    Var add_full(const std::string& name, Shape shape, double v) { return add(name, Arr::full(std::move(shape), v)); }

    void zero_grad() {
        for (auto& [name, v] : params) v.zero_grad();
    }
    void set_trainable(bool on) {
        for (auto& [name, v] : params) v.node->requires_grad = on;
    }
    int64_t numel() const {
        int64_t n = 0;
        for (const auto& [name, v] : params) n += v.numel();
        return n;
    }
    Var find(const std::string& name) const {
        for (const auto& [n, v] : params)
            if (n == name) return v;
        throw DomainError("ParamStore: no parameter named " + name);
    }
};

struct Linear {
    Var w, b;  // w [out,in]
    Linear() = default;
    Linear(ParamStore& ps, const std::string& name, int64_t in, int64_t out, double wscale = 1.0) {
        w = ps.add_randn(name + ".w", {out, in}, wscale * std::sqrt(2.0 / static_cast<double>(in)));
        b = ps.add_zeros(name + ".b", {out});
    }
    Var operator()(const Var& x) const { return linear(x, w, b); }
};

struct Conv2d {
    Var w, b;
    int stride = 1, pad = 1;
    Conv2d() = default;
    Conv2d(ParamStore& ps, const std::string& name, int64_t ci, int64_t co, int k, int stride_, int pad_,
           double wscale = 1.0)
        : stride(stride_), pad(pad_) {
        w = ps.add_randn(name + ".w", {co, ci, k, k}, wscale * std::sqrt(2.0 / static_cast<double>(ci * k * k)));
        b = ps.add_zeros(name + ".b", {co});
    }
    Var operator()(const Var& x) const { return conv2d(x, w, b, stride, pad); }
};

struct Conv1d {
    Var w, b;
    int pad = 0;
    Conv1d() = default;
    Conv1d(ParamStore& ps, const std::string& name, int64_t ci, int64_t co, int k, double wscale = 1.0)
        : pad((k - 1) / 2) {
        w = ps.add_randn(name + ".w", {co, ci, k}, wscale * std::sqrt(2.0 / static_cast<double>(ci * k)));
        b = ps.add_zeros(name + ".b", {co});
    }
    Var operator()(const Var& x) const { return conv1d(x, w, b, pad); }
};

struct GroupNorm {
    Var gamma, beta;
    int groups = 8;
    GroupNorm() = default;
    GroupNorm(ParamStore& ps, const std::string& name, int64_t c, int groups_) : groups(groups_) {
        gamma = ps.add_full(name + ".g", {c}, 1.0);
        beta = ps.add_zeros(name + ".b", {c});
    }
    Var operator()(const Var& x) const { return groupnorm(x, groups, gamma, beta); }
};

struct LayerNorm {
    Var gamma, beta;
    LayerNorm() = default;
    LayerNorm(ParamStore& ps, const std::string& name, int64_t d) {
        gamma = ps.add_full(name + ".g", {d}, 1.0);
        beta = ps.add_zeros(name + ".b", {d});
    }
    Var operator()(const Var& x) const { return layernorm(x, gamma, beta); }
};

// Scaled-dot-product attention with separate query and key/value inputs.
// heads must divide the model width.
struct Attention {
    Linear wq, wk, wv, wo;
    int heads = 1;
    Attention() = default;
    Attention(ParamStore& ps, const std::string& name, int64_t d_model, int64_t d_kv_in, int heads_)
        : wq(ps, name + ".q", d_model, d_model), wk(ps, name + ".k", d_kv_in, d_model),
          wv(ps, name + ".v", d_kv_in, d_model), wo(ps, name + ".o", d_model, d_model, 0.5), heads(heads_) {}

    Var operator()(const Var& q_in, const Var& kv_in) const {
        const int64_t d = wq.w.shape()[0];
        const int64_t dh = d / heads;
        Var q = wq(q_in), k = wk(kv_in), v = wv(kv_in);
        Var out;
        for (int h = 0; h < heads; ++h) {
            Var qh = slice_cols(q, h * dh, (h + 1) * dh);
            Var kh = slice_cols(k, h * dh, (h + 1) * dh);
            Var vh = slice_cols(v, h * dh, (h + 1) * dh);
            Var att = softmax_rows(mul_scalar(matmul_nt(qh, kh), 1.0 / std::sqrt(static_cast<double>(dh))));
            Var oh = matmul(att, vh);
            out = h == 0 ? oh : concat_last(out, oh);
        }
        return wo(out);
    }
};

}  // namespace gaia::nn
