#include <doctest.h>

#include <cmath>
#include <cstring>

#include "cacl/ops.hpp"
#include "cacl/optim.hpp"
#include "cacl/spectral.hpp"
#include "oracles.hpp"

using namespace cacl;

namespace {

ad::Tensor random_vector(std::size_t n, Rng& rng, bool requires_grad = false,
                         double lo = -2.0, double hi = 2.0) {
    std::vector<double> data(n);
    for (double& v : data) {
        v = rng.uniform(lo, hi);
    }
    return ad::Tensor::vector(std::move(data), requires_grad);
}

} // namespace

TEST_SUITE("autodiff") {

TEST_CASE("forward primitive values") {
    CHECK(ad::sigmoid(ad::Tensor::scalar(0.0)).value() == doctest::Approx(0.5).epsilon(1e-15));

    auto normalized = ad::l2_normalize(ad::Tensor::vector({3.0, 4.0}));
    CHECK(normalized[0] == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(normalized[1] == doctest::Approx(0.8).epsilon(1e-15));

    // Overflow safety: naive exp(1000) is inf, the stabilized form is exact.
    double lse = ad::log_sum_exp(ad::Tensor::vector({1000.0, 1000.0})).value();
    long double expected = 1000.0L + std::log(2.0L);
    CHECK(std::abs(lse - static_cast<double>(expected)) < 1e-12);

    auto sm = ad::softmax(ad::Tensor::vector({1.0, 1.0, 1.0, 1.0}));
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(sm[i] == doctest::Approx(0.25));
    }
}

TEST_CASE("shape mismatches are contract violations") {
    CHECK_THROWS_AS(ad::add(ad::Tensor::vector({1.0}), ad::Tensor::vector({1.0, 2.0})),
                    ContractError);
    CHECK_THROWS_AS(ad::matvec(ad::Tensor::from({2, 2}, {1, 0, 0, 1}),
                               ad::Tensor::vector({1.0, 2.0, 3.0})),
                    ContractError);
    CHECK_THROWS_AS(ad::dot(ad::Tensor::vector({1.0}), ad::Tensor::vector({1.0, 2.0})),
                    ContractError);
}

TEST_CASE("l2_normalize of the zero vector falls back to identity") {
    reset_warnings();
    auto out = ad::l2_normalize(ad::Tensor::vector({0.0, 0.0, 0.0}));
    CHECK(out[0] == 0.0);
    CHECK(warning_count("l2_normalize_zero") == 1);
}

TEST_CASE("l2_normalize output has unit norm") {
    Rng rng(7);
    for (int it = 0; it < 200; ++it) {
        auto x = random_vector(1 + rng.uniform_int(8), rng);
        bool zero = true;
        for (double v : x.data()) {
            zero = zero && v == 0.0;
        }
        if (zero) {
            continue;
        }
        auto y = ad::l2_normalize(x);
        double norm = 0.0;
        for (double v : y.data()) {
            norm += v * v;
        }
        CHECK(std::abs(std::sqrt(norm) - 1.0) <= 1e-12);
    }
}

TEST_CASE("backward: quadratic and sigmoid") {
    {
        ad::Tape tape;
        ad::TapeScope scope(tape);
        auto x = ad::Tensor::vector({1.0, 2.0}, true);
        auto loss = ad::dot(x, x);
        tape.backward(loss);
        CHECK(x.grad()[0] == doctest::Approx(2.0).epsilon(1e-15));
        CHECK(x.grad()[1] == doctest::Approx(4.0).epsilon(1e-15));
    }
    {
        ad::Tape tape;
        ad::TapeScope scope(tape);
        auto x = ad::Tensor::scalar(0.0, true);
        auto loss = ad::sigmoid(x);
        tape.backward(loss);
        CHECK(x.grad()[0] == doctest::Approx(0.25).epsilon(1e-15));
    }
}

TEST_CASE("backward rejects non-scalar loss") {
    ad::Tape tape;
    ad::TapeScope scope(tape);
    auto x = ad::Tensor::vector({1.0, 2.0}, true);
    auto y = ad::relu(x);
    CHECK_THROWS_AS(tape.backward(y), ContractError);
}

TEST_CASE("gradient accumulates over parameter reuse; constants get none") {
    ad::Tape tape;
    ad::TapeScope scope(tape);
    auto x = ad::Tensor::vector({1.5, -0.5}, true);
    auto c = ad::Tensor::vector({2.0, 3.0});
    auto loss = ad::add(ad::dot(x, c), ad::dot(x, x));
    tape.backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(2.0 + 3.0));
    CHECK(x.grad()[1] == doctest::Approx(3.0 - 1.0));
    CHECK_FALSE(c.has_grad());
}

TEST_CASE("two-layer net matches finite differences") {
    Rng rng(11);
    auto w1 = ad::Tensor::from({4, 3}, {}, false);
    std::vector<double> w1d(12), b1d(4), w2d(4), xd(3);
    for (auto* v : {&w1d, &b1d, &w2d, &xd}) {
        for (double& u : *v) {
            u = rng.uniform(-1.0, 1.0);
        }
    }
    auto weight1 = ad::Tensor::from({4, 3}, w1d, true);
    auto bias1 = ad::Tensor::vector(b1d, true);
    auto weight2 = ad::Tensor::vector(w2d, true);
    auto input = ad::Tensor::vector(xd);
    std::vector<ad::Tensor> params{weight1, bias1, weight2};
    auto f = [&] {
        return ad::dot(weight2, ad::tanh(ad::affine(weight1, input, bias1)));
    };
    CHECK(oracles::finite_diff_max_rel_error(params, f, 1e-5) < 1e-5);
}

TEST_CASE("gradients are bitwise deterministic") {
    auto build_and_grad = [](std::uint64_t seed) {
        Rng rng(seed);
        ad::Tape tape;
        ad::TapeScope scope(tape);
        auto x = random_vector(6, rng, true);
        auto w = ad::Tensor::from({6, 6}, std::vector<double>(36, 0.1), true);
        auto y = ad::softmax(ad::matvec(w, ad::tanh(x)));
        auto loss = ad::log_sum_exp(ad::mul(y, x));
        tape.backward(loss);
        std::vector<double> grads(x.grad().begin(), x.grad().end());
        grads.insert(grads.end(), w.grad().begin(), w.grad().end());
        return grads;
    };
    auto a = build_and_grad(42);
    auto b = build_and_grad(42);
    REQUIRE(a.size() == b.size());
    CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

TEST_CASE("adam: zero gradients leave parameters unchanged") {
    auto p = ad::Tensor::vector({1.0, -2.0, 3.0}, true);
    ad::Adam adam({p}, {});
    for (int i = 0; i < 5; ++i) {
        p.node()->ensure_grad(); // explicit zero gradient
        adam.step();
        adam.zero_grad();
    }
    CHECK(p[0] == 1.0);
    CHECK(p[1] == -2.0);
    CHECK(p[2] == 3.0);
}

TEST_CASE("adam: first step matches the closed form") {
    // With constant gradient g, step 1 gives exactly lr * g / (|g| + eps).
    ad::AdamConfig cfg;
    cfg.lr = 3e-4;
    cfg.eps = 1e-3;
    auto p = ad::Tensor::vector({0.5, -0.25}, true);
    const std::vector<double> g{0.2, -0.7};
    p.node()->grad = g;
    ad::Adam adam({p}, cfg);
    adam.step();
    for (std::size_t i = 0; i < 2; ++i) {
        double expected = (i == 0 ? 0.5 : -0.25) - cfg.lr * g[i] / (std::abs(g[i]) + cfg.eps);
        CHECK(p[i] == doctest::Approx(expected).epsilon(1e-15));
    }
}

TEST_CASE("adam: two steps reduce a convex quadratic") {
    // loss = |p - t|^2 around a fixed target
    auto p = ad::Tensor::vector({2.0, -1.0}, true);
    auto target = ad::Tensor::vector({0.3, 0.8});
    ad::AdamConfig cfg;
    cfg.lr = 0.05;
    ad::Adam adam({p}, cfg);
    auto loss_value = [&] {
        double acc = 0.0;
        for (std::size_t i = 0; i < 2; ++i) {
            acc += (p[i] - target[i]) * (p[i] - target[i]);
        }
        return acc;
    };
    double initial = loss_value();
    for (int it = 0; it < 2; ++it) {
        ad::Tape tape;
        ad::TapeScope scope(tape);
        auto diff = ad::sub(p, target);
        tape.backward(ad::dot(diff, diff));
        adam.step();
        adam.zero_grad();
    }
    CHECK(loss_value() < initial);
}

TEST_CASE("adam: NaN gradient aborts the update") {
    auto p = ad::Tensor::vector({1.0}, true);
    p.node()->grad = {std::numeric_limits<double>::quiet_NaN()};
    ad::Adam adam({p}, {});
    CHECK_THROWS_AS(adam.step(), NumericError);
    CHECK(p[0] == 1.0);
}

TEST_CASE("clip_gradients: identity below the threshold, exact scaling above") {
    {
        auto p = ad::Tensor::vector({0.0, 0.0}, true);
        p.node()->grad = {6.0, 8.0}; // norm 10
        double norm = ad::clip_gradients(std::array{p}, 2500.0);
        CHECK(norm == doctest::Approx(10.0));
        CHECK(p.grad()[0] == 6.0);
        CHECK(p.grad()[1] == 8.0);
    }
    {
        auto p = ad::Tensor::vector({0.0, 0.0}, true);
        p.node()->grad = {5000.0, 0.0};
        ad::clip_gradients(std::array{p}, 2500.0);
        CHECK(p.grad()[0] == doctest::Approx(2500.0));
        CHECK(p.grad()[1] == 0.0);
    }
}

TEST_CASE("clip_gradients never increases the global norm") {
    Rng rng(3);
    for (int it = 0; it < 100; ++it) {
        double max_norm = rng.uniform(0.5, 50.0);
        std::vector<ad::Tensor> params;
        double norm_sq = 0.0;
        for (int k = 0; k < 3; ++k) {
            auto p = random_vector(1 + rng.uniform_int(5), rng, true);
            p.node()->ensure_grad();
            for (double& g : p.node()->grad) {
                g = rng.uniform(-40.0, 40.0);
                norm_sq += g * g;
            }
            params.push_back(p);
        }
        double before = std::sqrt(norm_sq);
        double reported = ad::clip_gradients(params, max_norm);
        CHECK(reported == doctest::Approx(before));
        double after_sq = 0.0;
        for (const auto& p : params) {
            for (double g : p.grad()) {
                after_sq += g * g;
            }
        }
        double after = std::sqrt(after_sq);
        CHECK(after <= max_norm + 1e-9);
        if (before <= max_norm) {
            CHECK(after == doctest::Approx(before));
        }
    }
}

TEST_CASE("spectral normalization: diagonal and identity") {
    Rng rng(5);
    {
        auto w = ad::Tensor::from({2, 2}, {2.0, 0.0, 0.0, 1.0});
        auto normalized = ad::spectral_normalize(w, 200, rng);
        CHECK(normalized.data()[0] == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(normalized.data()[3] == doctest::Approx(0.5).epsilon(1e-9));
    }
    {
        auto eye = ad::Tensor::from({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
        auto normalized = ad::spectral_normalize(eye, 1, rng);
        for (std::size_t i = 0; i < 9; ++i) {
            CHECK(normalized.data()[i] == doctest::Approx(eye.data()[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("spectral normalization: zero matrix is returned unchanged") {
    reset_warnings();
    Rng rng(6);
    auto w = ad::Tensor::from({2, 3}, std::vector<double>(6, 0.0));
    auto normalized = ad::spectral_normalize(w, 5, rng);
    for (double v : normalized.data()) {
        CHECK(v == 0.0);
    }
    CHECK(warning_count("spectral_normalize_zero") == 1);
}

TEST_CASE("spectral normalization: random 32x32 against the SVD oracle") {
    Rng rng(9);
    for (int trial = 0; trial < 3; ++trial) {
        std::vector<double> data(32 * 32);
        for (double& v : data) {
            v = rng.normal();
        }
        auto w = ad::Tensor::from({32, 32}, data);
        auto normalized = ad::spectral_normalize(w, 50, rng);
        double sigma = oracles::sigma_max_jacobi(normalized.data(), 32, 32);
        CHECK(std::abs(sigma - 1.0) <= 1e-3);
    }
}

TEST_CASE("spectral norm gradient treats sigma as constant") {
    Rng rng(13);
    std::vector<double> data(9);
    for (double& v : data) {
        v = rng.normal();
    }
    auto w = ad::Tensor::from({3, 3}, data, true);
    ad::SpectralNorm sn(3, 3, rng);
    sn.apply(w, 30, true); // settle the estimate
    double sigma = sn.sigma(w);
    auto x = random_vector(3, rng);
    ad::Tape tape;
    ad::TapeScope scope(tape);
    auto y = sn.apply(w, 0, false);
    tape.backward(ad::log_sum_exp(ad::matvec(y, x)));
    // d(W/sigma)/dW = 1/sigma: compare against the unnormalized graph.
    std::vector<double> scaled(w.grad().begin(), w.grad().end());
    w.zero_grad();
    ad::Tape tape2;
    ad::TapeScope scope2(tape2);
    tape2.backward(ad::log_sum_exp(ad::matvec(ad::scale(w, 1.0 / sigma), x)));
    for (std::size_t i = 0; i < scaled.size(); ++i) {
        CHECK(scaled[i] == doctest::Approx(w.grad()[i]).epsilon(1e-12));
    }
}

} // TEST_SUITE
