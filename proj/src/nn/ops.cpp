#include "gaia/nn/ops.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace gaia::nn {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using MapC = Eigen::Map<const MatRM>;

namespace {

Var make_op(Arr value, std::vector<Var> parents, std::function<void(Node&)> backfn) {
    auto n = std::make_shared<Node>(std::move(value));
    bool req = false;
    for (const auto& p : parents) {
        n->parents.push_back(p.node);
        req = req || p.node->requires_grad;
    }
    n->requires_grad = req;
    if (req) n->backfn = std::move(backfn);
    return Var(n);
}

void check_same_shape(const Var& a, const Var& b, const char* op) {
    if (!a.value().same_shape(b.value()))
        throw DomainError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

double stable_sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

void backward(const Var& root, const Arr& seed) {
    if (!root.requires_grad()) return;
    // Iterative post-order topological sort.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.push_back({root.node.get(), 0});
    visited.insert(root.node.get());
    while (!stack.empty()) {
        auto& [n, i] = stack.back();
        if (i < n->parents.size()) {
            Node* p = n->parents[i].get();
            ++i;
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }
    root.node->accumulate(seed);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backfn && n->has_grad) n->backfn(*n);
    }
}

void backward(const Var& root) {
    if (root.numel() != 1)
        throw DomainError("backward: root must be scalar, got " + shape_str(root.shape()));
    backward(root, Arr(root.shape(), 1.0));
}

// ---------------------------------------------------------------------------
// elementwise

namespace {

template <typename Fwd, typename Bwd>
Var unary_op(const Var& a, Fwd f, Bwd dfdx_from_xy, const char*) {
    Arr out(a.shape());
    const double* x = a.value().ptr();
    double* y = out.ptr();
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) y[i] = f(x[i]);
    Var av = a;
    return make_op(std::move(out), {a}, [av, dfdx_from_xy](Node& node) {
        if (!av.node->requires_grad) return;
        Arr& g = av.node->ensure_grad();
        const double* x = av.node->value.ptr();
        const double* y = node.value.ptr();
        const double* gy = node.grad.ptr();
        double* gx = g.ptr();
        const int64_t n = node.value.numel();
        for (int64_t i = 0; i < n; ++i) gx[i] += gy[i] * dfdx_from_xy(x[i], y[i]);
    });
}

}  // namespace

Var add(const Var& a, const Var& b) {
    check_same_shape(a, b, "add");
    Arr out(a.shape());
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) out[i] = a.value()[i] + b.value()[i];
    Var av = a, bv = b;
    return make_op(std::move(out), {a, b}, [av, bv](Node& node) {
        if (av.node->requires_grad) av.node->accumulate(node.grad);
        if (bv.node->requires_grad) bv.node->accumulate(node.grad);
    });
}

Var sub(const Var& a, const Var& b) {
    check_same_shape(a, b, "sub");
    Arr out(a.shape());
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) out[i] = a.value()[i] - b.value()[i];
    Var av = a, bv = b;
    return make_op(std::move(out), {a, b}, [av, bv](Node& node) {
        if (av.node->requires_grad) av.node->accumulate(node.grad);
        if (bv.node->requires_grad) {
            Arr& g = bv.node->ensure_grad();
            for (int64_t i = 0; i < node.grad.numel(); ++i) g[i] -= node.grad[i];
        }
    });
}

Var mul(const Var& a, const Var& b) {
    check_same_shape(a, b, "mul");
    Arr out(a.shape());
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) out[i] = a.value()[i] * b.value()[i];
    Var av = a, bv = b;
    return make_op(std::move(out), {a, b}, [av, bv](Node& node) {
        const int64_t n = node.grad.numel();
        if (av.node->requires_grad) {
            Arr& g = av.node->ensure_grad();
            const double* bb = bv.node->value.ptr();
            for (int64_t i = 0; i < n; ++i) g[i] += node.grad[i] * bb[i];
        }
        if (bv.node->requires_grad) {
            Arr& g = bv.node->ensure_grad();
            const double* aa = av.node->value.ptr();
            for (int64_t i = 0; i < n; ++i) g[i] += node.grad[i] * aa[i];
        }
    });
}

Var neg(const Var& a) { return mul_scalar(a, -1.0); }

Var add_scalar(const Var& a, double s) {
    return unary_op(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; }, "add_scalar");
}

Var mul_scalar(const Var& a, double s) {
    return unary_op(a, [s](double x) { return x * s; }, [s](double, double) { return s; }, "mul_scalar");
}

Var abs_(const Var& a) {
    return unary_op(a, [](double x) { return std::abs(x); },
                    [](double x, double) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); }, "abs");
}

Var square(const Var& a) {
    return unary_op(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; }, "square");
}

Var exp_(const Var& a) {
    return unary_op(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; }, "exp");
}

Var log_(const Var& a) {
    return unary_op(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; }, "log");
}

Var sqrt_(const Var& a) {
    return unary_op(a, [](double x) { return std::sqrt(x); }, [](double, double y) { return 0.5 / y; }, "sqrt");
}

Var sigmoid(const Var& a) {
    return unary_op(a, [](double x) { return stable_sigmoid(x); },
                    [](double, double y) { return y * (1.0 - y); }, "sigmoid");
}

Var tanh_(const Var& a) {
    return unary_op(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; }, "tanh");
}

Var relu(const Var& a) {
    return unary_op(a, [](double x) { return x > 0 ? x : 0.0; },
                    [](double x, double) { return x > 0 ? 1.0 : 0.0; }, "relu");
}

Var silu(const Var& a) {
    return unary_op(a, [](double x) { return x * stable_sigmoid(x); },
                    [](double x, double) {
                        const double s = stable_sigmoid(x);
                        return s * (1.0 + x * (1.0 - s));
                    },
                    "silu");
}

Var clamp(const Var& a, double lo, double hi) {
    return unary_op(a, [lo, hi](double x) { return std::min(hi, std::max(lo, x)); },
                    [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; }, "clamp");
}

// ---------------------------------------------------------------------------
// reductions

Var sum(const Var& a) {
    double s = 0;
    for (int64_t i = 0; i < a.numel(); ++i) s += a.value()[i];
    Var av = a;
    return make_op(Arr::scalar(s), {a}, [av](Node& node) {
        if (!av.node->requires_grad) return;
        Arr& g = av.node->ensure_grad();
        const double gy = node.grad[0];
        for (int64_t i = 0; i < g.numel(); ++i) g[i] += gy;
    });
}

Var mean(const Var& a) { return mul_scalar(sum(a), 1.0 / static_cast<double>(a.numel())); }

// ---------------------------------------------------------------------------
// shape

Var reshape(const Var& a, Shape s) {
    Arr out = a.value().reshaped(std::move(s));
    Var av = a;
    return make_op(std::move(out), {a}, [av](Node& node) {
        if (!av.node->requires_grad) return;
        Arr g = node.grad.reshaped(av.shape());
        av.node->accumulate(g);
    });
}

Var detach(const Var& a) { return Var::leaf(a.value(), false); }

Var concat_last(const Var& a, const Var& b) {
    if (a.shape().size() != b.shape().size())
        throw DomainError("concat_last: rank mismatch");
    Shape sa = a.shape(), sb = b.shape();
    for (size_t i = 0; i + 1 < sa.size(); ++i)
        if (sa[i] != sb[i]) throw DomainError("concat_last: leading dims differ");
    const int64_t d1 = sa.back(), d2 = sb.back();
    const int64_t rows = a.numel() / d1;
    Shape so = sa;
    so.back() = d1 + d2;
    Arr out(so);
    for (int64_t r = 0; r < rows; ++r) {
        std::copy_n(a.value().ptr() + r * d1, d1, out.ptr() + r * (d1 + d2));
        std::copy_n(b.value().ptr() + r * d2, d2, out.ptr() + r * (d1 + d2) + d1);
    }
    Var av = a, bv = b;
    return make_op(std::move(out), {a, b}, [av, bv, rows, d1, d2](Node& node) {
        if (av.node->requires_grad) {
            Arr& g = av.node->ensure_grad();
            for (int64_t r = 0; r < rows; ++r)
                for (int64_t c = 0; c < d1; ++c) g[r * d1 + c] += node.grad[r * (d1 + d2) + c];
        }
        if (bv.node->requires_grad) {
            Arr& g = bv.node->ensure_grad();
            for (int64_t r = 0; r < rows; ++r)
                for (int64_t c = 0; c < d2; ++c) g[r * d2 + c] += node.grad[r * (d1 + d2) + d1 + c];
        }
    });
}

Var slice_cols(const Var& a, int64_t c0, int64_t c1) {
    if (a.shape().size() != 2) throw DomainError("slice_cols: expects rank-2");
    const int64_t n = a.shape()[0], d = a.shape()[1];
    if (c0 < 0 || c1 > d || c0 >= c1) throw DomainError("slice_cols: bad range");
    Arr out(Shape{n, c1 - c0});
    for (int64_t r = 0; r < n; ++r)
        std::copy_n(a.value().ptr() + r * d + c0, c1 - c0, out.ptr() + r * (c1 - c0));
    Var av = a;
    return make_op(std::move(out), {a}, [av, n, d, c0, c1](Node& node) {
        if (!av.node->requires_grad) return;
        Arr& g = av.node->ensure_grad();
        const int64_t w = c1 - c0;
        for (int64_t r = 0; r < n; ++r)
            for (int64_t c = 0; c < w; ++c) g[r * d + c0 + c] += node.grad[r * w + c];
    });
}

Var slice_rows(const Var& a, int64_t r0, int64_t r1) {
    if (a.shape().empty()) throw DomainError("slice_rows: scalar input");
    const int64_t n = a.shape()[0];
    if (r0 < 0 || r1 > n || r0 >= r1) throw DomainError("slice_rows: bad range");
    const int64_t rowsz = a.numel() / n;
    Shape so = a.shape();
    so[0] = r1 - r0;
    Arr out(so);
    std::copy_n(a.value().ptr() + r0 * rowsz, (r1 - r0) * rowsz, out.ptr());
    Var av = a;
    return make_op(std::move(out), {a}, [av, r0, r1, rowsz](Node& node) {
        if (!av.node->requires_grad) return;
        Arr& g = av.node->ensure_grad();
        const int64_t cnt = (r1 - r0) * rowsz;
        for (int64_t i = 0; i < cnt; ++i) g[r0 * rowsz + i] += node.grad[i];
    });
}

// ---------------------------------------------------------------------------
// matrix ops

Var matmul(const Var& a, const Var& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0])
        throw DomainError("matmul: bad shapes " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    const int64_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    Arr out(Shape{m, n});
    MapM(out.ptr(), m, n).noalias() = MapC(a.value().ptr(), m, k) * MapC(b.value().ptr(), k, n);
    Var av = a, bv = b;
    return make_op(std::move(out), {a, b}, [av, bv, m, k, n](Node& node) {
        MapC gy(node.grad.ptr(), m, n);
        if (av.node->requires_grad) {
            Arr& g = av.node->ensure_grad();
            MapM(g.ptr(), m, k).noalias() += gy * MapC(bv.node->value.ptr(), k, n).transpose();
        }
        if (bv.node->requires_grad) {
            Arr& g = bv.node->ensure_grad();
            MapM(g.ptr(), k, n).noalias() += MapC(av.node->value.ptr(), m, k).transpose() * gy;
        }
    });
}

Var matmul_nt(const Var& a, const Var& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[1])
        throw DomainError("matmul_nt: bad shapes " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    const int64_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[0];
    Arr out(Shape{m, n});
    MapM(out.ptr(), m, n).noalias() = MapC(a.value().ptr(), m, k) * MapC(b.value().ptr(), n, k).transpose();
    Var av = a, bv = b;
    return make_op(std::move(out), {a, b}, [av, bv, m, k, n](Node& node) {
        MapC gy(node.grad.ptr(), m, n);
        if (av.node->requires_grad) {
            Arr& g = av.node->ensure_grad();
            MapM(g.ptr(), m, k).noalias() += gy * MapC(bv.node->value.ptr(), n, k);
        }
        if (bv.node->requires_grad) {
            Arr& g = bv.node->ensure_grad();
            MapM(g.ptr(), n, k).noalias() += gy.transpose() * MapC(av.node->value.ptr(), m, k);
        }
    });
}

Var softmax_rows(const Var& a) {
    if (a.shape().size() != 2) throw DomainError("softmax_rows: expects rank-2");
    const int64_t n = a.shape()[0], d = a.shape()[1];
    Arr out(a.shape());
    for (int64_t r = 0; r < n; ++r) {
        const double* x = a.value().ptr() + r * d;
        double* y = out.ptr() + r * d;
        double mx = x[0];
        for (int64_t c = 1; c < d; ++c) mx = std::max(mx, x[c]);
        double s = 0;
        for (int64_t c = 0; c < d; ++c) {
            y[c] = std::exp(x[c] - mx);
            s += y[c];
        }
        for (int64_t c = 0; c < d; ++c) y[c] /= s;
    }
    Var av = a;
    return make_op(std::move(out), {a}, [av, n, d](Node& node) {
        if (!av.node->requires_grad) return;
        Arr& g = av.node->ensure_grad();
        for (int64_t r = 0; r < n; ++r) {
            const double* p = node.value.ptr() + r * d;
            const double* gy = node.grad.ptr() + r * d;
            double dot = 0;
            for (int64_t c = 0; c < d; ++c) dot += gy[c] * p[c];
            double* gx = g.ptr() + r * d;
            for (int64_t c = 0; c < d; ++c) gx[c] += p[c] * (gy[c] - dot);
        }
    });
}

// ---------------------------------------------------------------------------
// broadcast adds

Var add_rowvec(const Var& x, const Var& v) {
    if (x.shape().size() != 2 || v.shape().size() != 1 || x.shape()[1] != v.shape()[0])
        throw DomainError("add_rowvec: bad shapes");
    const int64_t n = x.shape()[0], d = x.shape()[1];
    Arr out(x.shape());
    for (int64_t r = 0; r < n; ++r)
        for (int64_t c = 0; c < d; ++c) out[r * d + c] = x.value()[r * d + c] + v.value()[c];
    Var xv = x, vv = v;
    return make_op(std::move(out), {x, v}, [xv, vv, n, d](Node& node) {
        if (xv.node->requires_grad) xv.node->accumulate(node.grad);
        if (vv.node->requires_grad) {
            Arr& g = vv.node->ensure_grad();
            for (int64_t r = 0; r < n; ++r)
                for (int64_t c = 0; c < d; ++c) g[c] += node.grad[r * d + c];
        }
    });
}

Var add_colvec(const Var& x, const Var& v) {
    if (x.shape().size() != 2 || v.shape().size() != 2 || v.shape()[1] != 1 || x.shape()[0] != v.shape()[0])
        throw DomainError("add_colvec: bad shapes");
    const int64_t n = x.shape()[0], d = x.shape()[1];
    Arr out(x.shape());
    for (int64_t r = 0; r < n; ++r)
        for (int64_t c = 0; c < d; ++c) out[r * d + c] = x.value()[r * d + c] + v.value()[r];
    Var xv = x, vv = v;
    return make_op(std::move(out), {x, v}, [xv, vv, n, d](Node& node) {
        if (xv.node->requires_grad) xv.node->accumulate(node.grad);
        if (vv.node->requires_grad) {
            Arr& g = vv.node->ensure_grad();
            for (int64_t r = 0; r < n; ++r)
                for (int64_t c = 0; c < d; ++c) g[r] += node.grad[r * d + c];
        }
    });
}

Var add_chan(const Var& x, const Var& b) {
    if (x.shape().size() != 4 || b.shape().size() != 1 || x.shape()[1] != b.shape()[0])
        throw DomainError("add_chan: bad shapes");
    const int64_t bs = x.shape()[0], c = x.shape()[1], hw = x.shape()[2] * x.shape()[3];
    Arr out(x.shape());
    for (int64_t i = 0; i < bs; ++i)
        for (int64_t ch = 0; ch < c; ++ch) {
            const double bb = b.value()[ch];
            const int64_t base = (i * c + ch) * hw;
            for (int64_t p = 0; p < hw; ++p) out[base + p] = x.value()[base + p] + bb;
        }
    Var xv = x, bv = b;
    return make_op(std::move(out), {x, b}, [xv, bv, bs, c, hw](Node& node) {
        if (xv.node->requires_grad) xv.node->accumulate(node.grad);
        if (bv.node->requires_grad) {
            Arr& g = bv.node->ensure_grad();
            for (int64_t i = 0; i < bs; ++i)
                for (int64_t ch = 0; ch < c; ++ch) {
                    const int64_t base = (i * c + ch) * hw;
                    double s = 0;
                    for (int64_t p = 0; p < hw; ++p) s += node.grad[base + p];
                    g[ch] += s;
                }
        }
    });
}

// ---------------------------------------------------------------------------
// normalization

Var layernorm(const Var& x, const Var& gamma, const Var& beta, double eps) {
    if (x.shape().size() != 2) throw DomainError("layernorm: expects rank-2");
    const int64_t n = x.shape()[0], d = x.shape()[1];
    if (gamma.shape() != Shape{d} || beta.shape() != Shape{d}) throw DomainError("layernorm: bad affine shapes");
    Arr out(x.shape());
    Arr xhat(x.shape());
    Arr invstd(Shape{n});
    for (int64_t r = 0; r < n; ++r) {
        const double* xr = x.value().ptr() + r * d;
        double mu = 0;
        for (int64_t c = 0; c < d; ++c) mu += xr[c];
        mu /= static_cast<double>(d);
        double var = 0;
        for (int64_t c = 0; c < d; ++c) var += (xr[c] - mu) * (xr[c] - mu);
        var /= static_cast<double>(d);
        const double is = 1.0 / std::sqrt(var + eps);
        invstd[r] = is;
        for (int64_t c = 0; c < d; ++c) {
            const double xh = (xr[c] - mu) * is;
            xhat[r * d + c] = xh;
            out[r * d + c] = gamma.value()[c] * xh + beta.value()[c];
        }
    }
    Var xv = x, gv = gamma, bv = beta;
    auto xhat_p = std::make_shared<Arr>(std::move(xhat));
    auto invstd_p = std::make_shared<Arr>(std::move(invstd));
    return make_op(std::move(out), {x, gamma, beta}, [xv, gv, bv, xhat_p, invstd_p, n, d](Node& node) {
        const Arr& xh = *xhat_p;
        if (gv.node->requires_grad) {
            Arr& g = gv.node->ensure_grad();
            for (int64_t r = 0; r < n; ++r)
                for (int64_t c = 0; c < d; ++c) g[c] += node.grad[r * d + c] * xh[r * d + c];
        }
        if (bv.node->requires_grad) {
            Arr& g = bv.node->ensure_grad();
            for (int64_t r = 0; r < n; ++r)
                for (int64_t c = 0; c < d; ++c) g[c] += node.grad[r * d + c];
        }
        if (xv.node->requires_grad) {
            Arr& g = xv.node->ensure_grad();
            for (int64_t r = 0; r < n; ++r) {
                double m1 = 0, m2 = 0;
                for (int64_t c = 0; c < d; ++c) {
                    const double gyh = node.grad[r * d + c] * gv.node->value[c];
                    m1 += gyh;
                    m2 += gyh * xh[r * d + c];
                }
                m1 /= static_cast<double>(d);
                m2 /= static_cast<double>(d);
                const double is = (*invstd_p)[r];
                for (int64_t c = 0; c < d; ++c) {
                    const double gyh = node.grad[r * d + c] * gv.node->value[c];
                    g[r * d + c] += is * (gyh - m1 - xh[r * d + c] * m2);
                }
            }
        }
    });
}

Var groupnorm(const Var& x, int groups, const Var& gamma, const Var& beta, double eps) {
    if (x.shape().size() != 4) throw DomainError("groupnorm: expects rank-4");
    const int64_t b = x.shape()[0], c = x.shape()[1], hw = x.shape()[2] * x.shape()[3];
    if (c % groups != 0) throw DomainError("groupnorm: channels not divisible by groups");
    if (gamma.shape() != Shape{c} || beta.shape() != Shape{c}) throw DomainError("groupnorm: bad affine shapes");
    const int64_t cg = c / groups;
    const int64_t gsz = cg * hw;
    Arr out(x.shape());
    Arr xhat(x.shape());
    Arr invstd(Shape{b, groups});
    for (int64_t i = 0; i < b; ++i)
        for (int64_t g = 0; g < groups; ++g) {
            const int64_t base = (i * c + g * cg) * hw;
            const double* xr = x.value().ptr() + base;
            double mu = 0;
            for (int64_t p = 0; p < gsz; ++p) mu += xr[p];
            mu /= static_cast<double>(gsz);
            double var = 0;
            for (int64_t p = 0; p < gsz; ++p) var += (xr[p] - mu) * (xr[p] - mu);
            var /= static_cast<double>(gsz);
            const double is = 1.0 / std::sqrt(var + eps);
            invstd[i * groups + g] = is;
            for (int64_t p = 0; p < gsz; ++p) xhat[base + p] = (xr[p] - mu) * is;
        }
    for (int64_t i = 0; i < b; ++i)
        for (int64_t ch = 0; ch < c; ++ch) {
            const int64_t base = (i * c + ch) * hw;
            const double ga = gamma.value()[ch], be = beta.value()[ch];
            for (int64_t p = 0; p < hw; ++p) out[base + p] = ga * xhat[base + p] + be;
        }
    Var xv = x, gv = gamma, bv = beta;
    auto xhat_p = std::make_shared<Arr>(std::move(xhat));
    auto invstd_p = std::make_shared<Arr>(std::move(invstd));
    const int64_t groups64 = groups;
    return make_op(std::move(out), {x, gamma, beta},
                   [xv, gv, bv, xhat_p, invstd_p, b, c, hw, cg, gsz, groups64](Node& node) {
        const Arr& xh = *xhat_p;
        if (gv.node->requires_grad) {
            Arr& g = gv.node->ensure_grad();
            for (int64_t i = 0; i < b; ++i)
                for (int64_t ch = 0; ch < c; ++ch) {
                    const int64_t base = (i * c + ch) * hw;
                    double s = 0;
                    for (int64_t p = 0; p < hw; ++p) s += node.grad[base + p] * xh[base + p];
                    g[ch] += s;
                }
        }
        if (bv.node->requires_grad) {
            Arr& g = bv.node->ensure_grad();
            for (int64_t i = 0; i < b; ++i)
                for (int64_t ch = 0; ch < c; ++ch) {
                    const int64_t base = (i * c + ch) * hw;
                    double s = 0;
                    for (int64_t p = 0; p < hw; ++p) s += node.grad[base + p];
                    g[ch] += s;
                }
        }
        if (xv.node->requires_grad) {
            Arr& g = xv.node->ensure_grad();
            for (int64_t i = 0; i < b; ++i)
                for (int64_t gr = 0; gr < groups64; ++gr) {
                    const int64_t base = (i * c + gr * cg) * hw;
                    double m1 = 0, m2 = 0;
                    for (int64_t j = 0; j < gsz; ++j) {
                        const int64_t ch = gr * cg + j / hw;
                        const double gyh = node.grad[base + j] * gv.node->value[ch];
                        m1 += gyh;
                        m2 += gyh * xh[base + j];
                    }
                    m1 /= static_cast<double>(gsz);
                    m2 /= static_cast<double>(gsz);
                    const double is = (*invstd_p)[i * groups64 + gr];
                    for (int64_t j = 0; j < gsz; ++j) {
                        const int64_t ch = gr * cg + j / hw;
                        const double gyh = node.grad[base + j] * gv.node->value[ch];
                        g[base + j] += is * (gyh - m1 - xh[base + j] * m2);
                    }
                }
        }
    });
}

// ---------------------------------------------------------------------------
// convolutions

namespace {

// im2col for one image: x [ci,h,w] -> cols [ci*kh*kw, oh*ow], zero padded.
void im2col(const double* x, int64_t ci, int64_t h, int64_t w, int64_t kh, int64_t kw, int64_t stride,
            int64_t pad, int64_t oh, int64_t ow, double* cols) {
    for (int64_t ch = 0; ch < ci; ++ch)
        for (int64_t ky = 0; ky < kh; ++ky)
            for (int64_t kx = 0; kx < kw; ++kx) {
                double* dst = cols + ((ch * kh + ky) * kw + kx) * oh * ow;
                for (int64_t oy = 0; oy < oh; ++oy) {
                    const int64_t iy = oy * stride + ky - pad;
                    if (iy < 0 || iy >= h) {
                        std::fill_n(dst + oy * ow, ow, 0.0);
                        continue;
                    }
                    const double* src = x + (ch * h + iy) * w;
                    for (int64_t ox = 0; ox < ow; ++ox) {
                        const int64_t ix = ox * stride + kx - pad;
                        dst[oy * ow + ox] = (ix >= 0 && ix < w) ? src[ix] : 0.0;
                    }
                }
            }
}

// Transpose of im2col: scatter cols back into the image gradient.
void col2im_acc(const double* cols, int64_t ci, int64_t h, int64_t w, int64_t kh, int64_t kw,
                int64_t stride, int64_t pad, int64_t oh, int64_t ow, double* gx) {
    for (int64_t ch = 0; ch < ci; ++ch)
        for (int64_t ky = 0; ky < kh; ++ky)
            for (int64_t kx = 0; kx < kw; ++kx) {
                const double* src = cols + ((ch * kh + ky) * kw + kx) * oh * ow;
                for (int64_t oy = 0; oy < oh; ++oy) {
                    const int64_t iy = oy * stride + ky - pad;
                    if (iy < 0 || iy >= h) continue;
                    double* dst = gx + (ch * h + iy) * w;
                    for (int64_t ox = 0; ox < ow; ++ox) {
                        const int64_t ix = ox * stride + kx - pad;
                        if (ix >= 0 && ix < w) dst[ix] += src[oy * ow + ox];
                    }
                }
            }
}

}  // namespace

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
    if (x.shape().size() != 4 || w.shape().size() != 4)
        throw DomainError("conv2d: expects x [b,ci,h,w], w [co,ci,kh,kw]");
    const int64_t bs = x.shape()[0], ci = x.shape()[1], h = x.shape()[2], wd = x.shape()[3];
    const int64_t co = w.shape()[0], kh = w.shape()[2], kw = w.shape()[3];
    if (w.shape()[1] != ci) throw DomainError("conv2d: channel mismatch");
    if (b.shape() != Shape{co}) throw DomainError("conv2d: bad bias shape");
    const int64_t oh = (h + 2 * pad - kh) / stride + 1;
    const int64_t ow = (wd + 2 * pad - kw) / stride + 1;
    if (oh <= 0 || ow <= 0) throw DomainError("conv2d: empty output");
    const int64_t ckk = ci * kh * kw;

    Arr out(Shape{bs, co, oh, ow});
    {
        Arr cols(Shape{ckk, oh * ow});
        for (int64_t i = 0; i < bs; ++i) {
            im2col(x.value().ptr() + i * ci * h * wd, ci, h, wd, kh, kw, stride, pad, oh, ow, cols.ptr());
            MapM y(out.ptr() + i * co * oh * ow, co, oh * ow);
            y.noalias() = MapC(w.value().ptr(), co, ckk) * MapC(cols.ptr(), ckk, oh * ow);
            for (int64_t ch = 0; ch < co; ++ch) y.row(ch).array() += b.value()[ch];
        }
    }
    Var xv = x, wv = w, bv = b;
    return make_op(std::move(out), {x, w, b},
                   [xv, wv, bv, bs, ci, h, wd, co, kh, kw, stride, pad, oh, ow, ckk](Node& node) {
        // cols are recomputed here rather than kept from the forward pass:
        // activation memory dominates at training time.
        Arr cols(Shape{ckk, oh * ow});
        Arr gcols(Shape{ckk, oh * ow});
        for (int64_t i = 0; i < bs; ++i) {
            MapC gy(node.grad.ptr() + i * co * oh * ow, co, oh * ow);
            const bool need_x = xv.node->requires_grad;
            const bool need_w = wv.node->requires_grad;
            if (need_w)
                im2col(xv.node->value.ptr() + i * ci * h * wd, ci, h, wd, kh, kw, stride, pad, oh, ow,
                       cols.ptr());
            if (need_w) {
                Arr& g = wv.node->ensure_grad();
                MapM(g.ptr(), co, ckk).noalias() += gy * MapC(cols.ptr(), ckk, oh * ow).transpose();
            }
            if (bv.node->requires_grad) {
                Arr& g = bv.node->ensure_grad();
                for (int64_t ch = 0; ch < co; ++ch) g[ch] += gy.row(ch).sum();
            }
            if (need_x) {
                MapM(gcols.ptr(), ckk, oh * ow).noalias() =
                    MapC(wv.node->value.ptr(), co, ckk).transpose() * gy;
                Arr& g = xv.node->ensure_grad();
                col2im_acc(gcols.ptr(), ci, h, wd, kh, kw, stride, pad, oh, ow, g.ptr() + i * ci * h * wd);
            }
        }
    });
}

Var conv1d(const Var& x, const Var& w, const Var& b, int pad) {
    if (x.shape().size() != 2 || w.shape().size() != 3)
        throw DomainError("conv1d: expects x [t,ci], w [co,ci,k]");
    const int64_t t = x.shape()[0], ci = x.shape()[1];
    const int64_t co = w.shape()[0], k = w.shape()[2];
    if (w.shape()[1] != ci) throw DomainError("conv1d: channel mismatch");
    if (b.shape() != Shape{co}) throw DomainError("conv1d: bad bias shape");
    const int64_t ot = t + 2 * pad - k + 1;
    if (ot <= 0) throw DomainError("conv1d: empty output");
    const int64_t ck = ci * k;

    // cols row r = [x[r - pad + tap][:] for tap in 0..k-1]; w flattened tap-major per row.
    auto build_cols = [&](const Arr& xin, Arr& cols) {
        for (int64_t r = 0; r < ot; ++r)
            for (int64_t tap = 0; tap < k; ++tap) {
                const int64_t it = r - pad + tap;
                double* dst = cols.ptr() + (r * k + tap) * ci;
                if (it < 0 || it >= t)
                    std::fill_n(dst, ci, 0.0);
                else
                    std::copy_n(xin.ptr() + it * ci, ci, dst);
            }
    };
    Arr cols(Shape{ot, ck});
    build_cols(x.value(), cols);
    Arr wmat(Shape{co, ck});
    for (int64_t o = 0; o < co; ++o)
        for (int64_t tap = 0; tap < k; ++tap)
            for (int64_t c = 0; c < ci; ++c) wmat[o * ck + tap * ci + c] = w.value()[(o * ci + c) * k + tap];
    Arr out(Shape{ot, co});
    MapM(out.ptr(), ot, co).noalias() = MapC(cols.ptr(), ot, ck) * MapC(wmat.ptr(), co, ck).transpose();
    for (int64_t r = 0; r < ot; ++r)
        for (int64_t o = 0; o < co; ++o) out[r * co + o] += b.value()[o];

    Var xv = x, wv = w, bv = b;
    auto cols_p = std::make_shared<Arr>(std::move(cols));
    auto wmat_p = std::make_shared<Arr>(std::move(wmat));
    return make_op(std::move(out), {x, w, b}, [xv, wv, bv, cols_p, wmat_p, t, ci, co, k, pad, ot, ck](Node& node) {
        MapC gy(node.grad.ptr(), ot, co);
        if (wv.node->requires_grad) {
            Arr gwmat(Shape{co, ck});
            MapM(gwmat.ptr(), co, ck).noalias() = gy.transpose() * MapC(cols_p->ptr(), ot, ck);
            Arr& g = wv.node->ensure_grad();
            for (int64_t o = 0; o < co; ++o)
                for (int64_t tap = 0; tap < k; ++tap)
                    for (int64_t c = 0; c < ci; ++c)
                        g[(o * ci + c) * k + tap] += gwmat[o * ck + tap * ci + c];
        }
        if (bv.node->requires_grad) {
            Arr& g = bv.node->ensure_grad();
            for (int64_t r = 0; r < ot; ++r)
                for (int64_t o = 0; o < co; ++o) g[o] += node.grad[r * co + o];
        }
        if (xv.node->requires_grad) {
            Arr gcols(Shape{ot, ck});
            MapM(gcols.ptr(), ot, ck).noalias() = gy * MapC(wmat_p->ptr(), co, ck);
            Arr& g = xv.node->ensure_grad();
            for (int64_t r = 0; r < ot; ++r)
                for (int64_t tap = 0; tap < k; ++tap) {
                    const int64_t it = r - pad + tap;
                    if (it < 0 || it >= t) continue;
                    const double* src = gcols.ptr() + (r * k + tap) * ci;
                    double* dst = g.ptr() + it * ci;
                    for (int64_t c = 0; c < ci; ++c) dst[c] += src[c];
                }
        }
    });
}

Var upsample2x(const Var& x) {
    if (x.shape().size() != 4) throw DomainError("upsample2x: expects rank-4");
    const int64_t b = x.shape()[0], c = x.shape()[1], h = x.shape()[2], w = x.shape()[3];
    Arr out(Shape{b, c, 2 * h, 2 * w});
    for (int64_t i = 0; i < b * c; ++i) {
        const double* src = x.value().ptr() + i * h * w;
        double* dst = out.ptr() + i * 4 * h * w;
        for (int64_t y = 0; y < h; ++y)
            for (int64_t xx = 0; xx < w; ++xx) {
                const double v = src[y * w + xx];
                dst[(2 * y) * 2 * w + 2 * xx] = v;
                dst[(2 * y) * 2 * w + 2 * xx + 1] = v;
                dst[(2 * y + 1) * 2 * w + 2 * xx] = v;
                dst[(2 * y + 1) * 2 * w + 2 * xx + 1] = v;
            }
    }
    Var xv = x;
    return make_op(std::move(out), {x}, [xv, b, c, h, w](Node& node) {
        if (!xv.node->requires_grad) return;
        Arr& g = xv.node->ensure_grad();
        for (int64_t i = 0; i < b * c; ++i) {
            double* dst = g.ptr() + i * h * w;
            const double* src = node.grad.ptr() + i * 4 * h * w;
            for (int64_t y = 0; y < h; ++y)
                for (int64_t xx = 0; xx < w; ++xx)
                    dst[y * w + xx] += src[(2 * y) * 2 * w + 2 * xx] + src[(2 * y) * 2 * w + 2 * xx + 1] +
                                       src[(2 * y + 1) * 2 * w + 2 * xx] +
                                       src[(2 * y + 1) * 2 * w + 2 * xx + 1];
        }
    });
}

Var concat_chan(const Var& a, const Var& b) {
    if (a.shape().size() != 4 || b.shape().size() != 4)
        throw DomainError("concat_chan: expects rank-4");
    const int64_t bs = a.shape()[0], c1 = a.shape()[1], c2 = b.shape()[1];
    const int64_t h = a.shape()[2], w = a.shape()[3];
    if (b.shape()[0] != bs || b.shape()[2] != h || b.shape()[3] != w)
        throw DomainError("concat_chan: shape mismatch");
    Arr out(Shape{bs, c1 + c2, h, w});
    const int64_t hw = h * w;
    for (int64_t i = 0; i < bs; ++i) {
        std::copy_n(a.value().ptr() + i * c1 * hw, c1 * hw, out.ptr() + i * (c1 + c2) * hw);
        std::copy_n(b.value().ptr() + i * c2 * hw, c2 * hw, out.ptr() + i * (c1 + c2) * hw + c1 * hw);
    }
    Var av = a, bv = b;
    return make_op(std::move(out), {a, b}, [av, bv, bs, c1, c2, hw](Node& node) {
        for (int64_t i = 0; i < bs; ++i) {
            if (av.node->requires_grad) {
                Arr& g = av.node->ensure_grad();
                const double* src = node.grad.ptr() + i * (c1 + c2) * hw;
                double* dst = g.ptr() + i * c1 * hw;
                for (int64_t j = 0; j < c1 * hw; ++j) dst[j] += src[j];
            }
            if (bv.node->requires_grad) {
                Arr& g = bv.node->ensure_grad();
                const double* src = node.grad.ptr() + i * (c1 + c2) * hw + c1 * hw;
                double* dst = g.ptr() + i * c2 * hw;
                for (int64_t j = 0; j < c2 * hw; ++j) dst[j] += src[j];
            }
        }
    });
}

// ---------------------------------------------------------------------------
// composites

Var linear(const Var& x, const Var& w, const Var& b) {
    return add_rowvec(matmul_nt(x, w), b);
}

Var mse(const Var& a, const Var& b) { return mean(square(sub(a, b))); }

Var l1(const Var& a, const Var& b) { return mean(abs_(sub(a, b))); }

}  // namespace gaia::nn
