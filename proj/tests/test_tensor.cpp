#include "foca/error.hpp"
#include "foca/tensor.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <cmath>

using namespace foca;
using test_helpers::identity_matrix;
using test_helpers::random_tensor;

TEST_SUITE_BEGIN("tensor");

TEST_CASE("matmul against hand values") {
    Rng rng(11);
    Tensor x = random_tensor({3, 4}, rng);
    Tensor ix = matmul(identity_matrix(3), x);
    CHECK(test_helpers::max_abs_diff(ix, x) == 0.0);

    Tensor a = Tensor::from_data({2, 2}, {1, 2, 3, 4});
    Tensor b = Tensor::from_data({2, 1}, {0, 1});
    Tensor c = matmul(a, b);
    CHECK(c.values()[0] == doctest::Approx(2.0));
    CHECK(c.values()[1] == doctest::Approx(4.0));
}

TEST_CASE("matmul shape errors name both operands") {
    Tensor a = Tensor::zeros({2, 3});
    Tensor b = Tensor::zeros({4, 2});
    bool threw = false;
    try {
        matmul(a, b);
    } catch (const DimensionError& e) {
        threw = true;
        const std::string msg = e.what();
        CHECK(msg.find("[2x3]") != std::string::npos);
        CHECK(msg.find("[4x2]") != std::string::npos);
    }
    CHECK(threw);
}

TEST_CASE("matmul gradient matches finite differences") {
    Rng rng(42);
    Tensor a = random_tensor({4, 5}, rng, /*requires_grad=*/true);
    Tensor b = random_tensor({5, 3}, rng, /*requires_grad=*/true);
    auto f = [&]() { return sum_all(matmul(a, b)); };
    auto report = finite_diff_check(f, {{"a", a}, {"b", b}}, 1e-5, 1e-4);
    CHECK(report.passed);
    CHECK(report.worst <= 1e-4);
}

TEST_CASE("softmax rows: symmetry, stabilization, direct values") {
    Tensor flat = softmax_rows(Tensor::from_data({1, 3}, {0, 0, 0}));
    for (int j = 0; j < 3; ++j) CHECK(flat.values()[j] == doctest::Approx(1.0 / 3).epsilon(1e-12));

    Tensor big = softmax_rows(Tensor::from_data({1, 2}, {1000, 0}));
    CHECK(std::abs(big.values()[0] - 1.0) <= 1e-12);
    CHECK(std::abs(big.values()[1] - 0.0) <= 1e-12);

    Tensor probs = softmax_rows(Tensor::from_data({1, 3}, {1, 2, 3}));
    CHECK(probs.values()[0] == doctest::Approx(0.09003).epsilon(1e-4));
    CHECK(probs.values()[1] == doctest::Approx(0.24473).epsilon(1e-4));
    CHECK(probs.values()[2] == doctest::Approx(0.66524).epsilon(1e-4));
}

TEST_CASE("softmax rows sum to one across magnitudes") {
    Rng rng(7);
    for (int round = 0; round < 50; ++round) {
        const double scale = rng.uniform(0.1, 1e3);
        Tensor x = random_tensor({4, 6}, rng, false, -scale, scale);
        Tensor s = softmax_rows(x);
        for (std::size_t i = 0; i < 4; ++i) {
            double total = 0.0;
            for (std::size_t j = 0; j < 6; ++j) total += s.values()[i * 6 + j];
            CHECK(std::abs(total - 1.0) <= 1e-9);
        }
    }
}

TEST_CASE("softmax gradient") {
    Rng rng(13);
    Tensor x = random_tensor({3, 4}, rng, true);
    Tensor w = random_tensor({3, 4}, rng);
    auto f = [&]() { return sum_all(mul(softmax_rows(x), w)); };
    CHECK(finite_diff_check(f, {{"x", x}}, 1e-5, 1e-4).passed);
}

TEST_CASE("avg_pool_spatial examples") {
    Tensor constant = Tensor::full({5, 7, 3}, 0.37);
    Tensor pooled = avg_pool_spatial(constant);
    REQUIRE(pooled.shape() == std::vector<std::size_t>{3});
    for (int k = 0; k < 3; ++k) CHECK(pooled.values()[k] == doctest::Approx(0.37).epsilon(1e-12));

    Tensor grid = Tensor::from_data({2, 2, 1}, {1, 2, 3, 4});
    CHECK(avg_pool_spatial(grid).values()[0] == doctest::Approx(2.5));

    Rng rng(5);
    Tensor x = random_tensor({3, 4, 2}, rng, true);
    auto f = [&]() { return sum_all(mul(avg_pool_spatial(x), Tensor::from_data({2}, {0.3, -1.2}))); };
    CHECK(finite_diff_check(f, {{"x", x}}, 1e-5, 1e-4).passed);
}

TEST_CASE("l2_normalize examples and idempotence") {
    Tensor z = l2_normalize(Tensor::from_data({2}, {3, 4}));
    CHECK(z.values()[0] == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(z.values()[1] == doctest::Approx(0.8).epsilon(1e-12));

    Tensor again = l2_normalize(z);
    CHECK(test_helpers::max_abs_diff(again, z) <= 1e-12);

    CHECK_THROWS_AS(l2_normalize(Tensor::from_data({2}, {0, 0})), DegenerateVectorError);
}

TEST_CASE("l2_normalize output norm is exactly unit length") {
    Rng rng(17);
    for (int round = 0; round < 20; ++round) {
        Tensor z = random_tensor({8}, rng, false, -5.0, 5.0);
        Tensor u = l2_normalize(z);
        double norm = 0.0;
        for (double v : u.values()) norm += v * v;
        CHECK(std::abs(std::sqrt(norm) - 1.0) <= 1e-9);
    }
}

TEST_CASE("finite_diff_check on x squared") {
    Tensor x = Tensor::from_data({1}, {3.0}, /*requires_grad=*/true);
    auto f = [&]() { return mul(x, x); };
    auto report = finite_diff_check(f, {{"x", x}}, 1e-5, 1e-8);
    CHECK(report.passed);
    CHECK(report.worst <= 1e-8);
}

TEST_CASE("finite_diff_check rejects a corrupted gradient") {
    // The corrupted op claims d(1.1*x^2)/dx while computing x^2.
    Tensor x = Tensor::from_data({1}, {3.0}, /*requires_grad=*/true);
    auto f = [&]() {
        std::vector<double> out = {x.values()[0] * x.values()[0]};
        return make_op({1}, std::move(out), {x}, [](detail::TensorNode& self) {
            self.parents[0]->grad[0] += 1.1 * self.grad[0] * 2.0 * self.parents[0]->values[0];
        });
    };
    auto report = finite_diff_check(f, {{"x", x}}, 1e-5, 1e-3);
    CHECK_FALSE(report.passed);
}

TEST_CASE("finite_diff_check rejects h outside the documented range") {
    Tensor x = Tensor::scalar(1.0, true);
    auto f = [&]() { return mul(x, x); };
    CHECK_THROWS_AS(finite_diff_check(f, {{"x", x}}, 1e-2, 1e-3), ParameterError);
}

TEST_CASE("randomized gradient checks across the op set") {
    Rng rng(123);
    Tensor a = random_tensor({3, 4}, rng, true);
    Tensor b = random_tensor({4, 5}, rng, true);
    Tensor v = random_tensor({5}, rng, true);
    Tensor c = random_tensor({3}, rng, true, 0.5, 2.0);

    auto f = [&]() {
        Tensor h = relu(add_rowvec(matmul(a, b), v));
        Tensor s = sigmoid(mul_scalar(h, 0.7));
        Tensor d = div_colvec(s, c);
        Tensor lse = row_logsumexp(d);
        return add(mean_all(lse), mul_scalar(sum_all(sqrt_elem(add_scalar(s, 1.0))), 0.01));
    };
    auto report = finite_diff_check(f, {{"a", a}, {"b", b}, {"v", v}, {"c", c}}, 1e-5, 1e-3);
    CHECK(report.passed);
}

TEST_CASE("conv2d values and gradient") {
    // 2x2 input, single channel, 3x3 kernel of ones, pad 1: each output
    // cell sums the in-bounds neighborhood.
    Tensor x = Tensor::from_data({2, 2, 1}, {1, 2, 3, 4});
    Tensor w = Tensor::full({3, 3, 1, 1}, 1.0);
    Tensor b = Tensor::zeros({1});
    Tensor y = conv2d(x, w, b, 1, 1);
    CHECK(y.values()[0] == doctest::Approx(10.0)); // whole image in view
    CHECK(y.values()[3] == doctest::Approx(10.0));

    Rng rng(31);
    Tensor xi = random_tensor({4, 4, 2}, rng, true);
    Tensor wi = random_tensor({3, 3, 2, 3}, rng, true);
    Tensor bi = random_tensor({3}, rng, true);
    auto f = [&]() { return mean_all(conv2d(xi, wi, bi, 1, 1)); };
    CHECK(finite_diff_check(f, {{"x", xi}, {"w", wi}, {"b", bi}}, 1e-5, 1e-3).passed);

    auto f2 = [&]() { return mean_all(relu(conv2d(xi, wi, bi, 2, 1))); };
    CHECK(finite_diff_check(f2, {{"x", xi}, {"w", wi}, {"b", bi}}, 1e-5, 1e-3).passed);
}

TEST_CASE("gather, concat, diag, max_rows gradients") {
    Rng rng(77);
    Tensor a = random_tensor({2, 3}, rng, true);
    Tensor b = random_tensor({2, 3}, rng, true);
    auto f = [&]() {
        Tensor cat = concat_rows({a, b});           // [4,3]
        Tensor mx = max_rows(cat);                  // [1,3]
        Tensor sq = matmul(transpose(cat), cat);    // [3,3]
        return add(sum_all(mx), mean_all(diag(sq)));
    };
    CHECK(finite_diff_check(f, {{"a", a}, {"b", b}}, 1e-5, 1e-3).passed);
}

TEST_CASE("backward accumulates through shared subexpressions") {
    Tensor x = Tensor::scalar(2.0, true);
    Tensor y = mul(x, x);      // x^2
    Tensor z = add(y, mul(y, x)); // x^2 + x^3
    z.backward();
    CHECK(x.grad()[0] == doctest::Approx(2 * 2.0 + 3 * 4.0)); // 4 + 12
}

TEST_CASE("no-grad guard suppresses graph construction") {
    Tensor x = Tensor::scalar(1.5, true);
    NoGradGuard guard;
    Tensor y = mul(x, x);
    CHECK_FALSE(y.requires_grad());
}

TEST_SUITE_END();
