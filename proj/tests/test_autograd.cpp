#include <doctest.h>

#include "gaia/nn/layers.hpp"
#include "oracle_helpers.hpp"

using namespace gaia;
using namespace gaia::nn;
using gaia::testing::gradcheck;

namespace {

std::mt19937_64 rng(1234);

Var rnd(Shape s, double scale = 1.0) { return Var::leaf(randn(std::move(s), rng, scale), true); }

}  // namespace

TEST_CASE("elementwise forward values") {
    Var a = Var::leaf(Arr({2, 2}, {1.0, -2.0, 3.0, 0.5}));
    Var b = Var::leaf(Arr({2, 2}, {0.5, 1.0, -1.0, 2.0}));
    CHECK(add(a, b).value()[0] == doctest::Approx(1.5));
    CHECK(sub(a, b).value()[1] == doctest::Approx(-3.0));
    CHECK(mul(a, b).value()[2] == doctest::Approx(-3.0));
    CHECK(abs_(a).value()[1] == doctest::Approx(2.0));
    CHECK(relu(a).value()[1] == doctest::Approx(0.0));
    CHECK(sigmoid(Var::leaf(Arr::scalar(0.0))).item() == doctest::Approx(0.5));
    CHECK(mean(a).item() == doctest::Approx(0.625));
    CHECK(clamp(a, -1.0, 1.0).value()[2] == doctest::Approx(1.0));
    CHECK_THROWS_AS(add(a, Var::leaf(Arr::zeros({3}))), DomainError);
}

TEST_CASE("gradcheck: unary and binary elementwise") {
    Var a = rnd({3, 4});
    Var b = rnd({3, 4});
    auto build = [&] {
        Var x = mul(silu(a), add_scalar(sigmoid(b), 0.2));
        x = add(x, square(tanh_(a)));
        x = sub(x, mul_scalar(abs_(b), 0.3));
        return mean(mul(x, exp_(mul_scalar(a, 0.1))));
    };
    CHECK(gradcheck(build, {a, b}) < 1e-6);
}

TEST_CASE("gradcheck: log sqrt clamp") {
    Var a = Var::leaf(rand_uniform({8}, rng, 0.5, 2.0), true);
    auto build = [&] { return sum(log_(sqrt_(clamp(a, 0.6, 1.8)))); };
    CHECK(gradcheck(build, {a}) < 1e-6);
}

TEST_CASE("gradcheck: matmul variants and softmax") {
    Var a = rnd({3, 5});
    Var b = rnd({5, 4});
    Var d = rnd({6, 4});
    Var v = rnd({6, 2});
    auto build = [&] {
        Var x = matmul(a, b);                 // [3,4]
        Var y = matmul_nt(x, d);              // [3,6]
        Var p = softmax_rows(mul_scalar(y, 0.7));
        return mean(matmul(p, v));
    };
    CHECK(gradcheck(build, {a, b, d, v}) < 1e-6);
}

TEST_CASE("gradcheck: broadcast adds, slices, concat") {
    Var x = rnd({4, 6});
    Var v = rnd({6});
    Var u = rnd({4, 1});
    auto build = [&] {
        Var y = add_rowvec(x, v);
        y = add_colvec(y, u);
        Var l = slice_cols(y, 0, 3);
        Var r = slice_cols(y, 3, 6);
        Var z = concat_last(mul(l, r), slice_rows(y, 0, 4) /* identity slice */);
        return mean(square(z));
    };
    CHECK(gradcheck(build, {x, v, u}) < 1e-6);
}

TEST_CASE("gradcheck: layernorm and groupnorm") {
    Var x = rnd({3, 8});
    Var g = Var::leaf(rand_uniform({8}, rng, 0.5, 1.5), true);
    Var b = rnd({8}, 0.1);
    auto build = [&] { return mean(mul(layernorm(x, g, b), x)); };
    CHECK(gradcheck(build, {x, g, b}, 1e-5) < 1e-5);

    Var xc = rnd({2, 4, 3, 3});
    Var gc = Var::leaf(rand_uniform({4}, rng, 0.5, 1.5), true);
    Var bc = rnd({4}, 0.1);
    auto build2 = [&] { return mean(square(groupnorm(xc, 2, gc, bc))); };
    CHECK(gradcheck(build2, {xc, gc, bc}, 1e-5) < 1e-5);
}

TEST_CASE("conv2d forward matches direct convolution") {
    Var x = rnd({2, 3, 5, 6});
    Var w = rnd({4, 3, 3, 3});
    Var b = rnd({4});
    for (int stride : {1, 2}) {
        for (int pad : {0, 1}) {
            Var y = conv2d(x, w, b, stride, pad);
            const int64_t oh = (5 + 2 * pad - 3) / stride + 1;
            const int64_t ow = (6 + 2 * pad - 3) / stride + 1;
            REQUIRE(y.shape() == Shape{2, 4, oh, ow});
            // direct sum oracle
            for (int64_t i = 0; i < 2; ++i)
                for (int64_t o = 0; o < 4; ++o)
                    for (int64_t oy = 0; oy < oh; ++oy)
                        for (int64_t ox = 0; ox < ow; ++ox) {
                            double acc = b.value()[o];
                            for (int64_t c = 0; c < 3; ++c)
                                for (int64_t ky = 0; ky < 3; ++ky)
                                    for (int64_t kx = 0; kx < 3; ++kx) {
                                        const int64_t iy = oy * stride + ky - pad;
                                        const int64_t ix = ox * stride + kx - pad;
                                        if (iy < 0 || iy >= 5 || ix < 0 || ix >= 6) continue;
                                        acc += x.value().at(i, c, iy, ix) * w.value().at(o, c, ky, kx);
                                    }
                            CHECK(y.value().at(i, o, oy, ox) == doctest::Approx(acc).epsilon(1e-10));
                        }
        }
    }
}

TEST_CASE("gradcheck: conv2d conv1d upsample concat_chan") {
    Var x = rnd({2, 2, 6, 6});
    Var w1 = rnd({3, 2, 3, 3});
    Var b1 = rnd({3});
    Var w2 = rnd({2, 3, 3, 3});
    Var b2 = rnd({2});
    auto build = [&] {
        Var y = silu(conv2d(x, w1, b1, 2, 1));   // [2,3,3,3]
        Var z = conv2d(y, w2, b2, 1, 1);         // [2,2,3,3]
        Var up = upsample2x(z);                  // [2,2,6,6]
        Var cat = concat_chan(up, x);            // [2,4,6,6]
        return mean(square(cat));
    };
    CHECK(gradcheck(build, {x, w1, b1, w2, b2}) < 1e-6);

    Var xs = rnd({7, 3});
    Var wc = rnd({4, 3, 5});
    Var bc = rnd({4});
    auto build1d = [&] { return mean(square(conv1d(xs, wc, bc, 2))); };
    CHECK(gradcheck(build1d, {xs, wc, bc}) < 1e-6);
}

TEST_CASE("conv1d preserves length with same padding") {
    Var xs = rnd({11, 3});
    Var wc = rnd({4, 3, 5});
    Var bc = rnd({4});
    CHECK(conv1d(xs, wc, bc, 2).shape() == Shape{11, 4});
}

TEST_CASE("gradcheck: attention block") {
    ParamStore ps(7);
    Attention att(ps, "att", 8, 3, 2);
    Var q = rnd({5, 8});
    Var kv = rnd({4, 3});
    auto build = [&] { return mean(square(att(q, kv))); };
    std::vector<Var> params{q, kv};
    for (auto& [n, p] : ps.params) params.push_back(p);
    CHECK(gradcheck(build, params) < 1e-6);
}

TEST_CASE("detach blocks gradient flow") {
    Var a = rnd({3});
    auto build = [&] { return sum(mul(detach(a), a)); };
    a.zero_grad();
    Var loss = build();
    backward(loss);
    // d/da of <stop(a), a> is stop(a) = a, not 2a.
    for (int64_t i = 0; i < 3; ++i) CHECK(a.grad()[i] == doctest::Approx(a.value()[i]));
}

TEST_CASE("backward requires scalar root") {
    Var a = rnd({3});
    CHECK_THROWS_AS(backward(mul_scalar(a, 2.0)), DomainError);
}

TEST_CASE("grad accumulates across shared subexpressions") {
    Var a = rnd({4});
    Var loss = add(sum(square(a)), sum(mul_scalar(a, 3.0)));
    backward(loss);
    for (int64_t i = 0; i < 4; ++i) CHECK(a.grad()[i] == doctest::Approx(2 * a.value()[i] + 3));
}
