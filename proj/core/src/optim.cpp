// Copyright 2026 The hypernas Authors
// SPDX-License-Identifier: Apache-2.0

#include "hypernas/optim.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <fmt/format.h>

namespace hypernas {

namespace {

void check_shapes(std::span<Tensor> params, const std::vector<std::vector<Scalar>>& buffers, const char* who) {
    if (buffers.size() != params.size()) {
        throw std::invalid_argument(
            fmt::format("{}: state tracks {} parameters, got {}", who, buffers.size(), params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (buffers[i].size() != params[i].numel()) {
            throw std::invalid_argument(fmt::format("{}: buffer {} has {} entries, parameter has {}", who, i,
                                                    buffers[i].size(), params[i].numel()));
        }
    }
}

void check_lr(Scalar lr, const char* who) {
    if (!(lr > 0)) throw std::invalid_argument(fmt::format("{}: learning rate must be > 0, got {}", who, lr));
}

void check_finite(const Tensor& p, std::size_t index, const char* who) {
    if (!all_finite(p)) throw NumericalError(fmt::format("{}: parameter {} became non-finite", who, index));
}

}  // namespace

SgdState SgdState::init(std::span<const Tensor> params, const SgdOptions& options) {
    SgdState s;
    s.options = options;
    for (const auto& p : params) s.velocity.emplace_back(p.numel(), 0.0);
    return s;
}

AdamState AdamState::init(std::span<const Tensor> params, const AdamOptions& options) {
    AdamState s;
    s.options = options;
    for (const auto& p : params) {
        s.first_moment.emplace_back(p.numel(), 0.0);
        s.second_moment.emplace_back(p.numel(), 0.0);
    }
    return s;
}

void sgd_momentum_step(std::span<Tensor> params, SgdState& state, Scalar lr) {
    check_lr(lr, "sgd");
    check_shapes(params, state.velocity, "sgd");
    const auto [beta, wd] = state.options;
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = params[i];
        if (!p.has_grad()) continue;
        auto w = p.mutable_data();
        const auto g = p.grad();
        auto& v = state.velocity[i];
        for (std::size_t k = 0; k < w.size(); ++k) {
            v[k] = beta * v[k] + g[k] + wd * w[k];
            w[k] -= lr * v[k];
        }
        check_finite(p, i, "sgd");
    }
    ++state.steps;
}

void adam_step(std::span<Tensor> params, AdamState& state, Scalar lr) {
    check_lr(lr, "adam");
    check_shapes(params, state.first_moment, "adam");
    check_shapes(params, state.second_moment, "adam");
    const auto& o = state.options;
    ++state.steps;
    const Scalar t = static_cast<Scalar>(state.steps);
    const Scalar c1 = 1.0 - std::pow(o.beta1, t);
    const Scalar c2 = 1.0 - std::pow(o.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = params[i];
        if (!p.has_grad()) continue;
        auto w = p.mutable_data();
        const auto g = p.grad();
        auto& m = state.first_moment[i];
        auto& v = state.second_moment[i];
        for (std::size_t k = 0; k < w.size(); ++k) {
            const Scalar gk = g[k] + o.weight_decay * w[k];
            m[k] = o.beta1 * m[k] + (1.0 - o.beta1) * gk;
            v[k] = o.beta2 * v[k] + (1.0 - o.beta2) * gk * gk;
            w[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + o.eps);
        }
        check_finite(p, i, "adam");
    }
}

Scalar cosine_lr(std::size_t step, std::size_t total_steps, Scalar lr_init) {
    if (total_steps == 0) throw std::invalid_argument("cosine_lr: total_steps must be > 0");
    if (step > total_steps) {
        throw std::invalid_argument(fmt::format("cosine_lr: step {} exceeds total {}", step, total_steps));
    }
    if (step == total_steps) return 0.0;
    const Scalar phase = std::numbers::pi * static_cast<Scalar>(step) / static_cast<Scalar>(total_steps);
    return lr_init * (1.0 + std::cos(phase)) / 2.0;
}

void zero_grads(std::span<Tensor> params) {
    for (auto& p : params) p.zero_grad();
}

}  // namespace hypernas
