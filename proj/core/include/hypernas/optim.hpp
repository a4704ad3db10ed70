// Copyright 2026 The hypernas Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hypernas/tensor.hpp"

namespace hypernas {

struct SgdOptions {
    Scalar momentum = 0.9;
    Scalar weight_decay = 3e-4;
};

/// Heavy-ball SGD state: v <- momentum*v + g + wd*p; p <- p - lr*v.
struct SgdState {
    SgdOptions options;
    std::vector<std::vector<Scalar>> velocity;
    std::uint64_t steps = 0;

    static SgdState init(std::span<const Tensor> params, const SgdOptions& options);
};

struct AdamOptions {
    Scalar beta1 = 0.5;
    Scalar beta2 = 0.999;
    Scalar eps = 1e-8;
    Scalar weight_decay = 1e-3;
};

/// Bias-corrected Adam with L2-style weight decay folded into the gradient.
struct AdamState {
    AdamOptions options;
    std::vector<std::vector<Scalar>> first_moment;
    std::vector<std::vector<Scalar>> second_moment;
    std::uint64_t steps = 0;

    static AdamState init(std::span<const Tensor> params, const AdamOptions& options);
};

// Parameters whose gradient slot is empty are skipped. Both steps throw
// std::invalid_argument for lr <= 0 and NumericalError if any updated value
// is not finite.
void sgd_momentum_step(std::span<Tensor> params, SgdState& state, Scalar lr);
void adam_step(std::span<Tensor> params, AdamState& state, Scalar lr);

/// lr_init * (1 + cos(pi * step / total_steps)) / 2.
Scalar cosine_lr(std::size_t step, std::size_t total_steps, Scalar lr_init);

void zero_grads(std::span<Tensor> params);

}  // namespace hypernas
