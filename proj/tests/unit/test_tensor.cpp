// Copyright 2026 The hypernas Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "hypernas/ops.hpp"
#include "hypernas/tensor.hpp"
#include "oracles.hpp"

namespace hypernas {
namespace {

TEST(Tensor, ShapeMustMatchValueCount) {
    EXPECT_THROW(Tensor(Shape{2, 3}, std::vector<Scalar>(5)), std::invalid_argument);
    Tensor t(Shape{2, 3}, std::vector<Scalar>{1, 2, 3, 4, 5, 6});
    EXPECT_EQ(t.numel(), 6u);
    EXPECT_EQ(t.dim(1), 3u);
    EXPECT_EQ(t[4], 5.0);
}

TEST(Tensor, CopiesShareStorage) {
    Tensor a = Tensor::zeros({3});
    Tensor b = a;
    b.mutable_data()[1] = 7;
    EXPECT_EQ(a[1], 7.0);
    Tensor c = a.detach();
    c.mutable_data()[1] = 1;
    EXPECT_EQ(a[1], 7.0);
}

TEST(Backward, SumGivesOnes) {
    Tensor x(Shape{4}, {1, -2, 3, 0.5}, true);
    backward(sum(x));
    for (double g : x.grad()) EXPECT_EQ(g, 1.0);
}

TEST(Backward, SumOfSquaresGivesTwiceInput) {
    Tensor x(Shape{4}, {1, -2, 3, 0.5}, true);
    backward(sum(mul(x, x)));
    for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(x.grad()[i], 2 * x[i]);
}

TEST(Backward, RejectsNonScalarLoss) {
    Tensor x(Shape{2}, {1, 2}, true);
    EXPECT_THROW(backward(scale(x, 2.0)), std::invalid_argument);
}

TEST(Backward, UnreachableTensorsUntouched) {
    Tensor x(Shape{2}, {1, 2}, true);
    Tensor y(Shape{2}, {3, 4}, true);
    backward(sum(x));
    EXPECT_TRUE(x.has_grad());
    EXPECT_FALSE(y.has_grad());
}

TEST(Backward, AccumulationIsAdditive) {
    Tensor x(Shape{3}, {0.5, -1.5, 2}, true);
    backward(add(sum(mul(x, x)), sum(scale(x, 3.0))));
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(x.grad()[i], 2 * x[i] + 3.0);

    Tensor z(Shape{3}, {0.5, -1.5, 2}, true);
    const Tensor r = relu(z);
    backward(add_all(std::vector<Tensor>{sum(r), sum(r), sum(r)}));
    EXPECT_EQ(z.grad()[0], 3.0);
    EXPECT_EQ(z.grad()[1], 0.0);
}

TEST(Graph, ReplaysInReverseExecutionOrder) {
    Tensor x(Shape{3}, {1, 2, 3}, true);
    const Tensor a = scale(x, 2);
    const Tensor b = relu(a);
    const Tensor c = mul(b, a);
    const Tensor loss = sum(c);
    const Graph g = Graph::collect(loss);
    ASSERT_GE(g.size(), 4u);
    for (std::size_t i = 1; i < g.size(); ++i) {
        EXPECT_GT(g.replay_order()[i - 1]->sequence, g.replay_order()[i]->sequence);
    }
    EXPECT_EQ(g.replay_order().front().get(), &loss.node());
}

TEST(Backward, NoGradGuardRecordsNothing) {
    Tensor x(Shape{2}, {1, 2}, true);
    Tensor y;
    {
        NoGradGuard guard;
        EXPECT_FALSE(grad_enabled());
        y = sum(mul(x, x));
    }
    EXPECT_TRUE(grad_enabled());
    EXPECT_FALSE(y.requires_grad());
}

TEST(Tensor, ChecksumTracksValues) {
    Tensor a(Shape{2}, {1, 2});
    const std::vector<Tensor> ts{a};
    const auto before = checksum(ts);
    EXPECT_EQ(before, checksum(ts));
    a.mutable_data()[0] = 1.0000000001;
    EXPECT_NE(before, checksum(ts));
}

TEST(Tensor, AllFinite) {
    EXPECT_TRUE(all_finite(Tensor::ones({3})));
    Tensor t = Tensor::ones({3});
    t.mutable_data()[2] = std::numeric_limits<double>::quiet_NaN();
    EXPECT_FALSE(all_finite(t));
}

}  // namespace
}  // namespace hypernas
