// Copyright 2026 The hypernas Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "hypernas/hypernetwork.hpp"
#include "hypernas/intensive_space.hpp"
#include "hypernas/ops.hpp"
#include "hypernas/rng.hpp"

namespace {

using namespace hypernas;

Tensor random_tensor(Shape shape, Rng& rng, bool requires_grad = false) {
    Tensor t(std::move(shape), requires_grad);
    for (auto& v : t.mutable_data()) v = rng.normal();
    return t;
}

void BM_Conv2dDepthwise(benchmark::State& state) {
    const auto c = static_cast<std::size_t>(state.range(0));
    Rng rng(1, "bench");
    const Tensor x = random_tensor({32, c, 8, 8}, rng);
    const Tensor w = random_tensor({c, 1, 3, 3}, rng);
    for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, w, {.padding = 1, .groups = c}));
}
BENCHMARK(BM_Conv2dDepthwise)->Arg(8)->Arg(16)->Arg(32);

void BM_Conv2dPointwise(benchmark::State& state) {
    const auto c = static_cast<std::size_t>(state.range(0));
    Rng rng(2, "bench");
    const Tensor x = random_tensor({32, c, 8, 8}, rng);
    const Tensor w = random_tensor({c, c, 1, 1}, rng);
    for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, w));
}
BENCHMARK(BM_Conv2dPointwise)->Arg(8)->Arg(16)->Arg(32);

IntensiveSpace random_space(CellType type, std::size_t k, Rng& rng) {
    const CellSpec cell{7, type};
    std::vector<Tensor> alpha;
    for (std::size_t e = 0; e < cell.num_edges(); ++e) alpha.push_back(random_tensor({8}, rng));
    return select_topk_ops(alpha, cell, k);
}

void BM_HyperNetworkStep(benchmark::State& state) {
    const bool with_backward = state.range(0) != 0;
    Rng rng(3, "bench");
    BackboneSpec spec;
    HyperNetwork net(spec, random_space(CellType::normal, 6, rng), random_space(CellType::reduce, 6, rng), rng);
    const Tensor x = random_tensor({32, 3, 8, 8}, rng);
    std::vector<int> labels(32);
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % spec.num_classes);
    const ArchParams arch = sample_random_alpha(net, rng).clone(true);
    for (auto _ : state) {
        if (with_backward) {
            backward(cross_entropy(net.forward(x, arch), labels));
            for (auto& p : net.parameters()) p.zero_grad();
        } else {
            NoGradGuard guard;
            benchmark::DoNotOptimize(net.forward(x, arch));
        }
    }
}
BENCHMARK(BM_HyperNetworkStep)->ArgName("backward")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
