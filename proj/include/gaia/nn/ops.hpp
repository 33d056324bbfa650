#pragma once

#include "gaia/nn/autograd.hpp"

namespace gaia::nn {

// Elementwise (same shape unless noted).
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var neg(const Var& a);
Var add_scalar(const Var& a, double s);
Var mul_scalar(const Var& a, double s);
Var abs_(const Var& a);
Var square(const Var& a);
Var exp_(const Var& a);
Var log_(const Var& a);
Var sqrt_(const Var& a);
Var sigmoid(const Var& a);
Var tanh_(const Var& a);
Var relu(const Var& a);
Var silu(const Var& a);
Var clamp(const Var& a, double lo, double hi);

// Reductions to scalar.
Var sum(const Var& a);
Var mean(const Var& a);

// Shape utilities.
Var reshape(const Var& a, Shape s);
Var detach(const Var& a);
Var concat_last(const Var& a, const Var& b);            // [..., d1] + [..., d2] -> [..., d1+d2]
Var slice_cols(const Var& a, int64_t c0, int64_t c1);   // [n, d] -> [n, c1-c0]
Var slice_rows(const Var& a, int64_t r0, int64_t r1);   // [n, ...] -> [r1-r0, ...]

// 2-d matrix ops ([m,k] row-major).
Var matmul(const Var& a, const Var& b);     // [m,k]x[k,n]
Var matmul_nt(const Var& a, const Var& b);  // [m,k]x[n,k]^T -> [m,n]
Var softmax_rows(const Var& a);             // softmax over last dim of [n,m]

// Broadcast adds.
Var add_rowvec(const Var& x, const Var& v);   // [n,d] + [d]
Var add_colvec(const Var& x, const Var& v);   // [n,d] + [n,1] broadcast over cols
Var add_chan(const Var& x, const Var& b);     // [b,c,h,w] + [c]

// Normalization (affine, eps inside).
Var layernorm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);            // [n,d]
Var groupnorm(const Var& x, int groups, const Var& gamma, const Var& beta, double eps = 1e-5);  // [b,c,h,w]

// Convolutions. conv2d: x [b,ci,h,w], w [co,ci,kh,kw]; conv1d: x [t,ci], w [co,ci,k].
Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad);
Var conv1d(const Var& x, const Var& w, const Var& b, int pad);
Var upsample2x(const Var& x);  // nearest, [b,c,h,w] -> [b,c,2h,2w]
Var concat_chan(const Var& a, const Var& b);  // along channel dim of [b,c,h,w]

// Composites.
Var linear(const Var& x, const Var& w, const Var& b);  // [n,k] x [o,k]^T + [o]
Var mse(const Var& a, const Var& b);                   // mean squared error
Var l1(const Var& a, const Var& b);                    // mean absolute error

}  // namespace gaia::nn
