#include <cmath>

#include "doctest.h"
#include "eegdiff/adam.hpp"
#include "eegdiff/ops.hpp"

using namespace eegdiff;

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
    auto w = Tensor::from_data({3}, {1.0, -2.0, 0.5}, true);
    w->zero_grad();
    Adam opt({w}, AdamConfig{});
    opt.step();
    CHECK(opt.step_count() == 1);
    CHECK(w->data()[0] == 1.0);
    CHECK(w->data()[1] == -2.0);
    CHECK(w->data()[2] == 0.5);
    // Gradients are consumed and zeroed.
    for (double g : w->grad()) CHECK(g == 0.0);
}

TEST_CASE("adam: first step with constant unit gradient moves by about lr") {
    // Bias correction makes m_hat = g and v_hat = g^2 at t=1, so the update
    // is lr * g / (|g| + eps) = lr / (1 + eps) for g = 1.
    AdamConfig cfg;
    cfg.lr = 0.01;
    auto w = Tensor::from_data({1}, {1.0}, true);
    w->ensure_grad();
    w->grad()[0] = 1.0;
    Adam opt({w}, cfg);
    opt.step();
    const double expected = 1.0 - cfg.lr * 1.0 / (1.0 + cfg.eps);
    CHECK(w->data()[0] == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("adam: two steps match the closed-form moment recursion") {
    AdamConfig cfg;
    cfg.lr = 1e-3;
    auto w = Tensor::from_data({1}, {0.4}, true);
    Adam opt({w}, cfg);

    const double g = 0.25;
    double m = 0.0, v = 0.0, ref = 0.4;
    for (int t = 1; t <= 2; ++t) {
        w->ensure_grad();
        w->grad()[0] = g;
        opt.step();
        m = cfg.beta1 * m + (1 - cfg.beta1) * g;
        v = cfg.beta2 * v + (1 - cfg.beta2) * g * g;
        const double m_hat = m / (1 - std::pow(cfg.beta1, t));
        const double v_hat = v / (1 - std::pow(cfg.beta2, t));
        ref -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
        CHECK(w->data()[0] == doctest::Approx(ref).epsilon(1e-14));
    }
}

TEST_CASE("adam: drives a 1-D quadratic toward its minimum") {
    AdamConfig cfg;
    cfg.lr = 0.1;
    auto w = Tensor::from_data({1}, {1.0}, true);
    Adam opt({w}, cfg);
    for (int step = 0; step < 200; ++step) {
        w->ensure_grad();
        w->grad()[0] = 2.0 * w->data()[0];  // d/dw w^2
        opt.step();
    }
    CHECK(std::abs(w->data()[0]) < 0.05);
}

TEST_CASE("adam: missing gradient is a state error") {
    auto w = Tensor::from_data({2}, {1.0, 2.0}, true);
    Adam opt({w}, AdamConfig{});
    CHECK_THROWS_AS(opt.step(), StateError);
}
