// Copyright 2026 The hypernas Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "hypernas/ops.hpp"
#include "hypernas/optim.hpp"

namespace hypernas {
namespace {

void set_grad(Tensor& p, std::vector<Scalar> g) {
    p.zero_grad();
    std::copy(g.begin(), g.end(), p.mutable_grad().begin());
}

TEST(Sgd, ZeroGradientNoDecayIsNoop) {
    std::vector<Tensor> params{Tensor(Shape{3}, {1, 2, 3}, true)};
    auto state = SgdState::init(params, {0.9, 0.0});
    set_grad(params[0], {0, 0, 0});
    sgd_momentum_step(params, state, 0.1);
    EXPECT_EQ(params[0][1], 2.0);
    EXPECT_EQ(state.steps, 1u);
}

TEST(Sgd, SingleStepPlain) {
    std::vector<Tensor> params{Tensor(Shape{1}, {0.5}, true)};
    auto state = SgdState::init(params, {0.0, 0.0});
    set_grad(params[0], {1});
    sgd_momentum_step(params, state, 0.1);
    EXPECT_DOUBLE_EQ(params[0][0], 0.4);
}

TEST(Sgd, MomentumAndDecay) {
    std::vector<Tensor> params{Tensor(Shape{1}, {1.0}, true)};
    auto state = SgdState::init(params, {0.9, 0.1});
    set_grad(params[0], {1});
    sgd_momentum_step(params, state, 0.1);
    // v = 1 + 0.1 = 1.1, p = 0.89
    EXPECT_DOUBLE_EQ(params[0][0], 0.89);
    set_grad(params[0], {1});
    sgd_momentum_step(params, state, 0.1);
    const double v = 0.9 * 1.1 + 1 + 0.1 * 0.89;
    EXPECT_DOUBLE_EQ(params[0][0], 0.89 - 0.1 * v);
    EXPECT_EQ(state.steps, 2u);
}

TEST(Sgd, SkipsParamsWithoutGrad) {
    std::vector<Tensor> params{Tensor(Shape{1}, {1.0}, true), Tensor(Shape{1}, {2.0}, true)};
    auto state = SgdState::init(params, {});
    set_grad(params[0], {1});
    sgd_momentum_step(params, state, 0.1);
    EXPECT_EQ(params[1][0], 2.0);
}

TEST(Adam, ThreeStepTraceMatchesReference) {
    // p <- p - lr * mhat / (sqrt(vhat) + eps) on loss p^2, g = 2p + wd*p.
    const double expected[] = {0.9000000004997502, 0.8018876030806625, 0.7069713135651723};
    std::vector<Tensor> params{Tensor(Shape{}, {1.0}, true)};
    auto state = AdamState::init(params, {0.5, 0.999, 1e-8, 1e-3});
    for (int t = 0; t < 3; ++t) {
        params[0].clear_grad();
        backward(mul(params[0], params[0]));
        adam_step(params, state, 0.1);
        EXPECT_NEAR(params[0].item(), expected[t], 1e-7);
    }
    EXPECT_EQ(state.steps, 3u);
}

TEST(Adam, ZeroGradientNoDecayIsNoop) {
    std::vector<Tensor> params{Tensor(Shape{2}, {1, -1}, true)};
    auto state = AdamState::init(params, {0.5, 0.999, 1e-8, 0.0});
    set_grad(params[0], {0, 0});
    adam_step(params, state, 0.1);
    EXPECT_EQ(params[0][0], 1.0);
    EXPECT_EQ(params[0][1], -1.0);
}

TEST(Optim, RejectsNonPositiveLr) {
    std::vector<Tensor> params{Tensor(Shape{1}, {1.0}, true)};
    auto sgd = SgdState::init(params, {});
    auto adam = AdamState::init(params, {});
    set_grad(params[0], {1});
    EXPECT_THROW(sgd_momentum_step(params, sgd, 0.0), std::invalid_argument);
    EXPECT_THROW(adam_step(params, adam, -1.0), std::invalid_argument);
}

TEST(Optim, NonFiniteUpdateIsReported) {
    std::vector<Tensor> params{Tensor(Shape{1}, {1.0}, true)};
    auto sgd = SgdState::init(params, {});
    set_grad(params[0], {std::numeric_limits<double>::infinity()});
    EXPECT_THROW(sgd_momentum_step(params, sgd, 0.1), NumericalError);
}

TEST(Optim, BuffersMatchParamShapes) {
    std::vector<Tensor> params{Tensor::zeros({2, 3}), Tensor::zeros({4})};
    const auto sgd = SgdState::init(params, {});
    const auto adam = AdamState::init(params, {});
    ASSERT_EQ(sgd.velocity.size(), 2u);
    EXPECT_EQ(sgd.velocity[0].size(), 6u);
    EXPECT_EQ(adam.first_moment[1].size(), 4u);
    EXPECT_EQ(adam.second_moment[0].size(), 6u);
}

TEST(CosineLr, Endpoints) {
    EXPECT_DOUBLE_EQ(cosine_lr(0, 10, 0.025), 0.025);
    EXPECT_NEAR(cosine_lr(10, 10, 0.025), 0.0, 1e-18);
    EXPECT_NEAR(cosine_lr(5, 10, 0.025), 0.0125, 1e-15);
    EXPECT_NEAR(cosine_lr(3, 12, 1.0), (1 + std::cos(std::numbers::pi / 4)) / 2, 1e-15);
    EXPECT_THROW(cosine_lr(11, 10, 0.1), std::invalid_argument);
}

TEST(Optim, Deterministic) {
    auto run = [] {
        std::vector<Tensor> params{Tensor(Shape{2}, {0.3, -0.7}, true)};
        auto state = AdamState::init(params, {});
        for (int i = 0; i < 5; ++i) {
            params[0].clear_grad();
            backward(sum(mul(params[0], params[0])));
            adam_step(params, state, 0.05);
        }
        return std::vector<Scalar>(params[0].data().begin(), params[0].data().end());
    };
    EXPECT_EQ(run(), run());
}

}  // namespace
}  // namespace hypernas
