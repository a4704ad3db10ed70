// Copyright 2026 The hypernas Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "hypernas/dataset.hpp"
#include "hypernas/hypernetwork.hpp"
#include "hypernas/metrics.hpp"
#include "hypernas/optim.hpp"

namespace hypernas {

struct GateState {
    bool g_alpha = false;
    bool g_G = false;

    bool operator==(const GateState&) const = default;
};

/// Epoch boundaries of the two stages. Stage 1 covers [0, i_train); Stage 2
/// covers [i_train, i_total) with w_G also trained inside [cross_start, cross_end).
struct SearchSchedule {
    std::size_t i_train = 60;
    std::size_t cross_start = 90;
    std::size_t cross_end = 100;
    std::size_t i_total = 120;
    std::size_t batch_size = 98;
    Scalar sgd_lr = 0.025;
    SgdOptions sgd{};
    Scalar adam_lr = 3e-4;
    AdamOptions adam{0.5, 0.999, 1e-8, 1e-3};
    Scalar cross_lr_scale = 0.1;

    void validate() const;
    GateState gate(std::size_t epoch) const;
    /// Learning rate applied to w_G during `epoch` (0 when g_G is off).
    Scalar wg_lr(std::size_t epoch) const;
};

struct StageOneResult {
    std::vector<EpochRecord> trace;
    SgdState sgd;
};

/// Stage 1: w_G trained by SGD-momentum on the train split with a freshly
/// sampled random α_arch per minibatch.
StageOneResult train_hypernetwork(HyperNetwork& net, const Dataset& data, const SearchSchedule& schedule,
                                  Rng& alpha_rng, Rng& shuffle_rng, const EpochCallback& on_epoch = {});

struct SearchOptions {
    bool force_alpha_gate_off = false;  // diagnostic: never update α_arch
};

struct SearchResult {
    ArchParams best;
    std::size_t best_epoch = 0;
    double best_val_acc = 0;
    ArchParams final_arch;
    std::vector<EpochRecord> trace;
    std::uint64_t wg_checksum_start = 0;
    std::vector<std::uint64_t> wg_checksums;  // after each Stage-2 epoch
    AdamState adam;
    SgdState sgd;
};

/// Stage 2: α_arch (Adam, train loss) searched under the gate schedule; `sgd`
/// continues the Stage-1 optimizer state for the cross-search window. Returns
/// the best-validation snapshot (latest epoch on ties).
SearchResult search_architecture(HyperNetwork& net, const Dataset& data, const SearchSchedule& schedule, SgdState sgd,
                                 Rng& init_rng, Rng& shuffle_rng, const SearchOptions& options = {},
                                 const EpochCallback& on_epoch = {});

struct DiscreteOp {
    std::size_t cell = 0;
    std::size_t node = 0;
    std::size_t source = 0;
    OperationKind op = OperationKind::zero;
    double prob = 0;  // per-cell generation probability frozen at discretization

    bool operator==(const DiscreteOp&) const = default;
};

struct DiscreteArchitecture {
    std::size_t t = 0;
    std::vector<DiscreteOp> ops;  // ordered by (cell, node, source, op)

    /// Lines `cell_l node_j source_i op_name prob`, sorted lexicographically.
    std::string to_text() const;
    static DiscreteArchitecture from_text(std::string_view text);

    bool operator==(const DiscreteArchitecture&) const = default;
};

/// Top-T slots per node by the cell's softmax probability; ties go to the
/// lower source, then enumeration order.
DiscreteArchitecture discretize(const ArchParams& arch, const HyperNetwork& net, std::size_t t);

/// Routing that executes only the retained slots: generators see the frozen
/// probabilities, mixing renormalizes them over the survivors of each node.
std::vector<CellRouting> discrete_routing(const DiscreteArchitecture& arch, const HyperNetwork& net);

double evaluate_architecture(const DiscreteArchitecture& arch, const HyperNetwork& net, const Split& split,
                             std::size_t batch_size);
double evaluate_relaxed(const ArchParams& arch, const HyperNetwork& net, const Split& split, std::size_t batch_size);

struct ComplexityCount {
    std::string exact;        // decimal digits
    std::string power;        // "b^e"
    std::size_t order = 0;    // floor(log10(exact))
};

/// (C(K,T))^((M-3)·L) discrete sub-graphs over L cells.
ComplexityCount complexity_count(std::size_t m, std::size_t k, std::size_t t, std::size_t l);

}  // namespace hypernas
