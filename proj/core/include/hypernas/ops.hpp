// Copyright 2026 The hypernas Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "hypernas/tensor.hpp"

namespace hypernas {

// Elementwise and reduction primitives. Shapes must match exactly; there is
// no broadcasting.
Tensor add(const Tensor& a, const Tensor& b);
Tensor add_all(std::span<const Tensor> terms);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, Scalar factor);
Tensor sum(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);

/// Σ_k weights[k] · terms[k]; `weights` is 1-D with one entry per term.
Tensor weighted_sum(std::span<const Tensor> terms, const Tensor& weights);

/// Picks entries of a 1-D tensor.
Tensor gather(const Tensor& x, std::span<const std::size_t> indices);

Tensor softmax(const Tensor& x, std::size_t axis);

/// Mean negative log-likelihood of integer class labels under row logits.
Tensor cross_entropy(const Tensor& logits, std::span<const int> labels);

/// x[N,F_in] · weightᵀ + bias.
Tensor fully_connected(const Tensor& input, const Tensor& weight, const Tensor& bias);

struct Conv2dOptions {
    std::size_t stride = 1;
    std::size_t padding = 0;
    std::size_t dilation = 1;
    std::size_t groups = 1;
};

/// Direct (non-im2col) 2-D cross-correlation, no bias.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Conv2dOptions& options = {});

enum class PoolKind { max, avg };

struct Pool2dOptions {
    std::size_t kernel = 3;
    std::size_t stride = 1;
    std::size_t padding = 1;
};

/// Average pooling divides by the number of in-bounds taps.
Tensor pool2d(const Tensor& input, PoolKind kind, const Pool2dOptions& options = {});

/// Per-channel standardization with the current batch statistics; no affine
/// parameters and no running averages.
Tensor batch_standardize(const Tensor& input, Scalar eps = 1e-5);

Tensor global_avg_pool(const Tensor& input);
Tensor concat_channels(std::span<const Tensor> parts);

/// Drops the first `top` rows and `left` columns.
Tensor crop2d(const Tensor& input, std::size_t top, std::size_t left);

/// input[:, :, ::stride, ::stride]
Tensor subsample2d(const Tensor& input, std::size_t stride);

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t padding,
                               std::size_t dilation);

}  // namespace hypernas
