// Copyright 2026 The hypernas Authors
// SPDX-License-Identifier: Apache-2.0

#include <map>

#include <gtest/gtest.h>

#include "hypernas/ops.hpp"
#include "hypernas/search_space.hpp"
#include "oracles.hpp"

namespace hypernas {
namespace {

using oracle::random_tensor;

std::map<OperationKind, OpKernels> random_kernels(std::size_t c, Rng& rng) {
    std::map<OperationKind, OpKernels> out;
    for (OperationKind op : kAllOperations) {
        if (!is_conv(op)) continue;
        const auto st = kernel_stages(op, c);
        out[op] = {random_tensor(st[0], rng, 0.3), random_tensor(st[1], rng, 0.3)};
    }
    return out;
}

KernelLookup lookup(const std::map<OperationKind, OpKernels>& k) {
    return [&k](OperationKind op) -> const OpKernels& { return k.at(op); };
}

TEST(Operations, EnumerationAndNames) {
    EXPECT_EQ(kAllOperations.size(), 8u);
    for (OperationKind op : kAllOperations) EXPECT_EQ(op_from_name(op_name(op)), op);
    EXPECT_THROW(op_from_name("conv_7x7"), std::invalid_argument);
    std::size_t convs = 0;
    for (OperationKind op : kAllOperations) convs += is_conv(op);
    EXPECT_EQ(convs, 4u);
}

TEST(Operations, KernelStageShapes) {
    const auto st = kernel_stages(OperationKind::sep_conv_3x3, 8);
    ASSERT_EQ(st.size(), 2u);
    EXPECT_EQ(shape_numel(st[0]), 72u);
    EXPECT_EQ(shape_numel(st[1]), 64u);
    EXPECT_EQ(kernel_stages(OperationKind::dil_conv_5x5, 4)[0], (Shape{4, 1, 5, 5}));
    EXPECT_TRUE(kernel_stages(OperationKind::max_pool_3x3, 8).empty());
}

TEST(CellSpec, EdgeLayout) {
    const CellSpec cell{7};
    EXPECT_EQ(cell.num_edges(), 14u);
    EXPECT_EQ(cell.num_intermediate(), 4u);
    std::vector<bool> seen(14, false);
    for (std::size_t j = 2; j < 6; ++j)
        for (std::size_t i = 0; i < j; ++i) {
            const std::size_t e = cell.edge_index(i, j);
            ASSERT_LT(e, 14u);
            EXPECT_FALSE(seen[e]);
            seen[e] = true;
        }
    EXPECT_THROW(CellSpec{3}.validate(), std::invalid_argument);
}

TEST(AlphaInit, SmallSeededAndUniformish) {
    const CellSpec cell{7};
    Rng a(1, "a"), b(1, "a");
    const AlphaOriginal x = alpha_init(cell, a), y = alpha_init(cell, b);
    ASSERT_EQ(x.normal.size(), 14u);
    ASSERT_EQ(x.reduce.size(), 14u);
    for (std::size_t e = 0; e < 14; ++e) {
        EXPECT_EQ(x.normal[e].numel(), 8u);
        EXPECT_TRUE(std::equal(x.normal[e].data().begin(), x.normal[e].data().end(), y.normal[e].data().begin()));
        const Tensor p = softmax(x.normal[e], 0);
        for (double v : p.data()) EXPECT_NEAR(v, 0.125, 1e-3);
    }
}

TEST(Backbone, ReductionPositions) {
    BackboneSpec s;
    s.num_cells = 4;
    EXPECT_EQ(s.reduction_positions(), (std::vector<std::size_t>{1, 2}));
    s.num_cells = 8;
    EXPECT_EQ(s.reduction_positions(), (std::vector<std::size_t>{2, 5}));
    s.num_cells = 14;
    EXPECT_EQ(s.reduction_positions(), (std::vector<std::size_t>{4, 9}));
    const auto layout = backbone_layout(BackboneSpec{});
    EXPECT_EQ(layout[1].type, CellType::reduce);
    EXPECT_EQ(layout[1].c_cell, 2 * layout[0].c_cell);
    EXPECT_TRUE(layout[2].reduce_prev);
}

TEST(MixedEdge, SaturatedIdentityPassesInput) {
    Rng rng(2, "t");
    const Tensor x = random_tensor({2, 4, 8, 8}, rng);
    const auto k = random_kernels(4, rng);
    Tensor alpha = Tensor::zeros({8});
    alpha.mutable_data()[static_cast<std::size_t>(OperationKind::identity)] = 50;
    const Tensor y = mixed_edge_forward(x, alpha, 1, lookup(k));
    for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_NEAR(y[i], x[i], 1e-3);
}

TEST(MixedEdge, MatchesOpByOpSum) {
    Rng rng(3, "t");
    const Tensor x = random_tensor({1, 4, 8, 8}, rng);
    const auto k = random_kernels(4, rng);
    for (std::size_t stride : {1u, 2u}) {
        const Tensor alpha = random_tensor({8}, rng);
        const Tensor y = mixed_edge_forward(x, alpha, stride, lookup(k));
        // Hand-rolled softmax and accumulation.
        double mx = alpha[0];
        for (double v : alpha.data()) mx = std::max(mx, v);
        std::vector<double> w(8);
        double z = 0;
        for (std::size_t o = 0; o < 8; ++o) z += w[o] = std::exp(alpha[o] - mx);
        std::vector<double> want(y.numel(), 0.0);
        for (std::size_t o = 0; o < 8; ++o) {
            const OperationKind op = kAllOperations[o];
            const Tensor out = apply_operation(op, x, stride, is_conv(op) ? k.at(op) : OpKernels{});
            ASSERT_EQ(out.numel(), want.size());
            for (std::size_t i = 0; i < want.size(); ++i) want[i] += w[o] / z * out[i];
        }
        for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(y[i], want[i], 1e-5);

        const Tensor uniform = mixed_edge_forward(x, Tensor::zeros({8}), stride, lookup(k));
        std::vector<double> mean(y.numel(), 0.0);
        for (OperationKind op : kAllOperations) {
            const Tensor out = apply_operation(op, x, stride, is_conv(op) ? k.at(op) : OpKernels{});
            for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += out[i] / 8;
        }
        for (std::size_t i = 0; i < mean.size(); ++i) EXPECT_NEAR(uniform[i], mean[i], 1e-9);
    }
}

TEST(MixedEdge, ShiftInvariant) {
    Rng rng(4, "t");
    const Tensor x = random_tensor({1, 4, 6, 6}, rng);
    const auto k = random_kernels(4, rng);
    const Tensor alpha = random_tensor({8}, rng);
    Tensor shifted = alpha.detach();
    for (auto& v : shifted.mutable_data()) v += 3.7;
    const Tensor a = mixed_edge_forward(x, alpha, 1, lookup(k));
    const Tensor b = mixed_edge_forward(x, shifted, 1, lookup(k));
    for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_NEAR(a[i], b[i], 1e-5);
    EXPECT_THROW(mixed_edge_forward(x, Tensor::zeros({7}), 1, lookup(k)), std::invalid_argument);
}

TEST(MixedEdge, ZeroOpHasStridedShape) {
    const Tensor z = apply_operation(OperationKind::zero, Tensor::ones({2, 4, 8, 8}), 2, {});
    EXPECT_EQ(z.shape(), (Shape{2, 4, 4, 4}));
    for (double v : z.data()) EXPECT_EQ(v, 0.0);
}

TEST(CellForward, ZeroAlphaSilencesCell) {
    Rng rng(5, "t");
    const Tensor s0 = random_tensor({2, 4, 6, 6}, rng), s1 = random_tensor({2, 4, 6, 6}, rng);
    const CellSpec cell{7};
    std::vector<Tensor> alpha(14, Tensor::zeros({8}));
    for (auto& a : alpha) {
        a = Tensor::zeros({8});
        a.mutable_data()[7] = 50;
    }
    std::vector<std::map<OperationKind, OpKernels>> k;
    for (int e = 0; e < 14; ++e) k.push_back(random_kernels(4, rng));
    const Tensor out =
        cell_forward(s0, s1, cell, alpha, [&](std::size_t e, OperationKind op) -> const OpKernels& { return k[e].at(op); });
    EXPECT_EQ(out.shape(), (Shape{2, 16, 6, 6}));
    for (double v : out.data()) EXPECT_NEAR(v, 0.0, 1e-3);
}

TEST(CellForward, SingleIntermediateIsTheOutput) {
    Rng rng(6, "t");
    const Tensor s0 = random_tensor({1, 4, 6, 6}, rng), s1 = random_tensor({1, 4, 6, 6}, rng);
    const CellSpec cell{4};
    ASSERT_EQ(cell.num_edges(), 2u);
    std::vector<Tensor> alpha{random_tensor({8}, rng), random_tensor({8}, rng)};
    std::vector<std::map<OperationKind, OpKernels>> k{random_kernels(4, rng), random_kernels(4, rng)};
    const auto kern = [&](std::size_t e, OperationKind op) -> const OpKernels& { return k[e].at(op); };
    const Tensor out = cell_forward(s0, s1, cell, alpha, kern);
    const Tensor n2 = add(mixed_edge_forward(s0, alpha[0], 1, [&](OperationKind op) -> const OpKernels& { return kern(0, op); }),
                          mixed_edge_forward(s1, alpha[1], 1, [&](OperationKind op) -> const OpKernels& { return kern(1, op); }));
    ASSERT_EQ(out.shape(), n2.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) EXPECT_NEAR(out[i], n2[i], 1e-12);
}

TEST(CellForward, RejectsMismatchedInputs) {
    const CellSpec cell{7};
    std::vector<Tensor> alpha(14, Tensor::zeros({8}));
    const auto none = [](std::size_t, OperationKind) -> const OpKernels& {
        static const OpKernels k;
        return k;
    };
    EXPECT_THROW(cell_forward(Tensor::zeros({1, 4, 6, 6}), Tensor::zeros({1, 2, 6, 6}), cell, alpha, none),
                 std::invalid_argument);
    alpha.pop_back();
    EXPECT_THROW(cell_forward(Tensor::zeros({1, 4, 6, 6}), Tensor::zeros({1, 4, 6, 6}), cell, alpha, none),
                 std::invalid_argument);
}

TEST(Network, ShapeDeterminismAndBiasOnZeroInput) {
    BackboneSpec spec;  // L=4, C=8, 8x8, 4 classes
    Rng init(7, "init"), arng(7, "alpha"), xr(7, "x");
    const Supernet net(spec, init);
    const AlphaOriginal alpha = alpha_init(CellSpec{7}, arng);
    const Tensor x = random_tensor({3, 3, 8, 8}, xr);
    const Tensor a = network_forward(x, net, alpha);
    const Tensor b = network_forward(x, net, alpha);
    EXPECT_EQ(a.shape(), (Shape{3, 4}));
    for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_EQ(a[i], b[i]);

    const Tensor z = network_forward(Tensor::zeros({2, 3, 8, 8}), net, alpha);
    const auto named = net.named_parameters();
    Tensor bias;
    for (const auto& [name, t] : named)
        if (name == "classifier.bias") bias = t;
    ASSERT_TRUE(bias.defined());
    for (std::size_t r = 0; r < 2; ++r)
        for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(z[r * 4 + c], bias[c], 1e-12);
}

TEST(Network, RejectsExhaustedSpatialExtent) {
    BackboneSpec spec;
    Rng init(8, "init"), arng(8, "alpha");
    const Supernet net(spec, init);
    const AlphaOriginal alpha = alpha_init(CellSpec{7}, arng);
    EXPECT_THROW(network_forward(Tensor::zeros({1, 3, 6, 6}), net, alpha), std::invalid_argument);
    EXPECT_THROW(network_forward(Tensor::zeros({1, 1, 8, 8}), net, alpha), std::invalid_argument);
    spec.image_size = 2;
    EXPECT_THROW(spec.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace hypernas
