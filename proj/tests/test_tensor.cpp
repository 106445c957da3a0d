#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ncad/common.hpp"
#include "ncad/tensor.hpp"
#include "test_util.hpp"

using namespace ncad;
using test::grad_check;
using test::random_tensor;

TEST_CASE("shape bookkeeping and construction") {
    auto t = Tensor::from_values({2, 3}, {1, 2, 3, 4, 5, 6});
    CHECK(t.numel() == 6);
    CHECK(t.dim(0) == 2);
    CHECK(t.dim(1) == 3);
    CHECK_FALSE(t.is_scalar());

    auto s = Tensor::scalar(4.5);
    CHECK(s.is_scalar());
    CHECK(s.item() == 4.5);

    CHECK_THROWS_AS(Tensor::from_values({2, 2}, {1, 2, 3}), ConfigError);
    CHECK_THROWS_AS((void)t.item(), ConfigError);
}

TEST_CASE("non-finite forward values are rejected") {
    auto x = Tensor::from_values({2}, {-1.0, 2.0}, true);
    CHECK_THROWS_AS((void)ncad::log(x), NumericError);
    auto big = Tensor::from_values({1}, {1e308}, true);
    CHECK_THROWS_AS((void)mul(big, big), NumericError);
    CHECK_THROWS_AS(Tensor::from_values({1}, {std::nan("")}), NumericError);
}

TEST_CASE("identity 1x1 convolution reproduces its input") {
    Rng rng(7);
    auto x = random_tensor({2, 3, 9}, rng);
    // One 1x1 tap per channel wired straight through.
    std::vector<double> wv(3 * 3 * 1, 0.0);
    for (int c = 0; c < 3; ++c) wv[static_cast<std::size_t>(c * 3 + c)] = 1.0;
    auto w = Tensor::from_values({3, 3, 1}, std::move(wv));
    auto b = Tensor::zeros({3});
    auto y = conv1d_causal(x, w, b, 1);
    REQUIRE(y.shape() == Shape{2, 3, 9});
    for (std::size_t i = 0; i < 2 * 3 * 9; ++i) CHECK(y.values()[i] == x.values()[i]);
}

TEST_CASE("causal convolution never looks ahead") {
    Rng rng(11);
    const std::int64_t T = 16;
    auto w = random_tensor({2, 2, 3}, rng, -1, 1, false);
    auto b = random_tensor({2}, rng, -1, 1, false);
    auto x = random_tensor({1, 2, T}, rng, -1, 1, false);
    for (std::int64_t dil : {1, 2, 4}) {
        auto base = conv1d_causal(x, w, b, dil);
        for (std::int64_t t = 0; t < T; ++t) {
            auto xs = Tensor::from_values(x.shape(),
                                          {x.values().begin(), x.values().end()});
            for (std::int64_t c = 0; c < 2; ++c) xs.values_mut()[static_cast<std::size_t>(c * T + t)] += 0.37;
            auto pert = conv1d_causal(xs, w, b, dil);
            for (std::int64_t c = 0; c < 2; ++c)
                for (std::int64_t u = 0; u < t; ++u) {
                    CHECK(pert.values()[static_cast<std::size_t>(c * T + u)] ==
                          base.values()[static_cast<std::size_t>(c * T + u)]);
                }
        }
    }
}

TEST_CASE("conv1d matches a hand-rolled dilated stencil") {
    // x = [1,2,3,4], k = 2, dilation 2, w = [0.5, 1.0], bias 0.25:
    // y[t] = 0.25 + 1.0*x[t] + 0.5*x[t-2] (missing taps read zero).
    auto x = Tensor::from_values({1, 1, 4}, {1, 2, 3, 4});
    auto w = Tensor::from_values({1, 1, 2}, {0.5, 1.0});
    auto b = Tensor::from_values({1}, {0.25});
    auto y = conv1d_causal(x, w, b, 2);
    CHECK(y.values()[0] == doctest::Approx(1.25).epsilon(1e-12));
    CHECK(y.values()[1] == doctest::Approx(2.25).epsilon(1e-12));
    CHECK(y.values()[2] == doctest::Approx(3.75).epsilon(1e-12));
    CHECK(y.values()[3] == doctest::Approx(5.25).epsilon(1e-12));
}

TEST_CASE("conv1d gradient matches finite differences") {
    Rng rng(13);
    auto x = random_tensor({2, 3, 8}, rng);
    auto w = random_tensor({4, 3, 3}, rng);
    auto b = random_tensor({4}, rng);
    auto res = grad_check({x, w, b}, [&] { return sum_all(square(conv1d_causal(x, w, b, 2))); });
    CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("linear forward and gradient") {
    auto x = Tensor::from_values({1, 2}, {1.0, 2.0}, true);
    auto w = Tensor::from_values({1, 2}, {3.0, 4.0}, true);
    auto b = Tensor::from_values({1}, {0.5}, true);
    auto y = linear(x, w, b);
    CHECK(y.values()[0] == doctest::Approx(11.5).epsilon(1e-12));

    Rng rng(17);
    auto x2 = random_tensor({3, 5}, rng);
    auto w2 = random_tensor({4, 5}, rng);
    auto b2 = random_tensor({4}, rng);
    auto res = grad_check({x2, w2, b2}, [&] { return mean_all(square(linear(x2, w2, b2))); });
    CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("max pooling over time picks the max and routes its gradient") {
    auto x = Tensor::from_values({1, 1, 3}, {1.0, 5.0, 2.0}, true);
    auto y = max_pool_time(x);
    REQUIRE(y.shape() == Shape{1, 1});
    CHECK(y.values()[0] == 5.0);
    backward(sum_all(y));
    CHECK(x.grad()[0] == 0.0);
    CHECK(x.grad()[1] == 1.0);
    CHECK(x.grad()[2] == 0.0);

    // Ties resolve to the earliest timestep.
    auto tie = Tensor::from_values({1, 1, 3}, {7.0, 7.0, 1.0}, true);
    backward(sum_all(max_pool_time(tie)));
    CHECK(tie.grad()[0] == 1.0);
    CHECK(tie.grad()[1] == 0.0);
}

TEST_CASE("max pooling gradient matches finite differences") {
    Rng rng(19);
    auto x = random_tensor({2, 4, 7}, rng);
    auto res = grad_check({x}, [&] { return sum_all(square(max_pool_time(x))); });
    CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("l2 normalization maps [3,4] to [0.6,0.8]") {
    auto x = Tensor::from_values({1, 2}, {3.0, 4.0});
    auto y = l2_normalize_rows(x);
    CHECK(y.values()[0] == doctest::Approx(0.6).epsilon(1e-9));
    CHECK(y.values()[1] == doctest::Approx(0.8).epsilon(1e-9));

    // The epsilon keeps the all-zero row finite.
    auto z = l2_normalize_rows(Tensor::zeros({1, 3}));
    for (double v : z.values()) CHECK(v == 0.0);
}

TEST_CASE("l2 normalization gradient matches finite differences") {
    Rng rng(23);
    auto x = random_tensor({3, 4}, rng, 0.5, 2.0);
    auto probe = random_tensor({3, 4}, rng, -1, 1, false);
    auto res = grad_check({x}, [&] { return sum_all(mul(l2_normalize_rows(x), probe)); });
    CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("elementwise op gradients match finite differences") {
    Rng rng(29);
    auto a = random_tensor({2, 3}, rng, 0.2, 1.5);
    auto b = random_tensor({2, 3}, rng, 0.2, 1.5);
    auto res = grad_check({a, b}, [&] {
        auto t = mul(ncad::exp(scale(a, 0.5)), add(ncad::log(b), square(sub(a, b))));
        return mean_all(add_scalar(neg(t), 2.0));
    });
    CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("sum gradients are constant") {
    auto x = Tensor::from_values({2}, {1.0, 2.0}, true);
    backward(sum_all(x));
    CHECK(x.grad()[0] == 1.0);
    CHECK(x.grad()[1] == 1.0);

    auto y = Tensor::from_values({2}, {1.0, 2.0}, true);
    backward(sum_all(square(y)));
    CHECK(y.grad()[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(y.grad()[1] == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("row reductions") {
    auto x = Tensor::from_values({2, 3}, {1, 2, 3, 4, 5, 6}, true);
    auto s = row_sum(x);
    REQUIRE(s.shape() == Shape{2});
    CHECK(s.values()[0] == 6.0);
    CHECK(s.values()[1] == 15.0);

    auto n = row_l2_norm(Tensor::from_values({2, 2}, {3, 4, 0, 0}));
    CHECK(n.values()[0] == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(n.values()[1] == 0.0);

    Rng rng(31);
    auto z = random_tensor({3, 4}, rng, 0.3, 2.0);
    auto res = grad_check({z}, [&] { return sum_all(square(row_l2_norm(z))); });
    CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("clamp saturates and cuts the gradient at the rails") {
    auto x = Tensor::from_values({3}, {-2.0, 0.5, 2.0}, true);
    auto y = clamp(x, 0.0, 1.0);
    CHECK(y.values()[0] == 0.0);
    CHECK(y.values()[1] == 0.5);
    CHECK(y.values()[2] == 1.0);
    backward(sum_all(y));
    CHECK(x.grad()[0] == 0.0);
    CHECK(x.grad()[1] == 1.0);
    CHECK(x.grad()[2] == 0.0);
}

TEST_CASE("leaky relu slope") {
    auto x = Tensor::from_values({2}, {-2.0, 3.0}, true);
    auto y = leaky_relu(x, 0.1);
    CHECK(y.values()[0] == doctest::Approx(-0.2).epsilon(1e-12));
    CHECK(y.values()[1] == 3.0);
    backward(sum_all(y));
    CHECK(x.grad()[0] == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(x.grad()[1] == 1.0);
}

TEST_CASE("gradients accumulate across backward calls until cleared") {
    auto x = Tensor::from_values({1}, {3.0}, true);
    backward(sum_all(square(x)));
    backward(sum_all(square(x)));
    CHECK(x.grad()[0] == doctest::Approx(12.0).epsilon(1e-12));
    x.zero_grad();
    backward(sum_all(square(x)));
    CHECK(x.grad()[0] == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("double backward without retain_graph throws") {
    auto x = Tensor::from_values({1}, {2.0}, true);
    auto loss = sum_all(square(x));
    backward(loss);
    CHECK_THROWS_AS(backward(loss), ConfigError);

    auto loss2 = sum_all(square(x));
    backward(loss2, /*retain_graph=*/true);
    backward(loss2, /*retain_graph=*/true);  // legal with retain
}

TEST_CASE("backward rejects non-scalar or detached losses") {
    auto x = Tensor::from_values({2}, {1.0, 2.0}, true);
    CHECK_THROWS_AS(backward(square(x)), ConfigError);
    auto frozen = Tensor::from_values({1}, {1.0}, false);
    CHECK_THROWS_AS(backward(sum_all(frozen)), ConfigError);
}

TEST_CASE("no-grad regions record no graph") {
    auto x = Tensor::from_values({2}, {1.0, 2.0}, true);
    {
        autograd::NoGradGuard guard;
        auto y = sum_all(square(x));
        CHECK_FALSE(y.requires_grad());
        CHECK_THROWS_AS(backward(y), ConfigError);
    }
    // Autograd switches back on when the guard leaves scope.
    auto z = sum_all(square(x));
    CHECK(z.requires_grad());
}

TEST_CASE("non-leaf tensors refuse in-place mutation") {
    auto x = Tensor::from_values({2}, {1.0, 2.0}, true);
    auto y = square(x);
    CHECK_THROWS_AS((void)y.values_mut(), ConfigError);
}

TEST_CASE("shared subexpressions receive summed gradients") {
    // f = x^2 + 3x reuses x twice; df/dx = 2x + 3.
    auto x = Tensor::from_values({1}, {5.0}, true);
    auto loss = sum_all(add(square(x), scale(x, 3.0)));
    backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(13.0).epsilon(1e-12));
}

TEST_CASE("composite graph gradient matches finite differences") {
    Rng rng(37);
    auto x = random_tensor({2, 2, 6}, rng);
    auto w1 = random_tensor({3, 2, 2}, rng, -0.7, 0.7);
    auto b1 = random_tensor({3}, rng, -0.2, 0.2);
    auto wl = random_tensor({4, 3}, rng, -0.7, 0.7);
    auto bl = random_tensor({4}, rng, -0.2, 0.2);
    // Probe projection keeps the loss sensitive to the embedding direction
    // (the squared norm of a normalized row is constant).
    auto probe = random_tensor({2, 4}, rng, -1, 1, false);
    auto res = grad_check({x, w1, b1, wl, bl}, [&] {
        auto h = leaky_relu(conv1d_causal(x, w1, b1, 1), 0.01);
        auto pooled = max_pool_time(h);
        auto emb = l2_normalize_rows(linear(pooled, wl, bl));
        return mean_all(square(mul(emb, probe)));
    });
    CHECK(res.max_rel_err < 1e-5);
}
