// Copyright 2026 The hypernas Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hypernas/dataset.hpp"
#include "hypernas/metrics.hpp"
#include "hypernas/optim.hpp"
#include "hypernas/search_space.hpp"

namespace hypernas {

/// A retained (source node, operation) candidate feeding intermediate `node`.
/// Ordering is (node, source, op enumeration order).
struct Slot {
    std::size_t node = 0;
    std::size_t source = 0;
    OperationKind op = OperationKind::zero;

    auto operator<=>(const Slot&) const = default;
};

/// The pruned per-cell-type space: exactly K non-zero slots per intermediate
/// node. Slots are stored node-major in Slot order, so node j occupies
/// [slot_offset(j), slot_offset(j) + K).
class IntensiveSpace {
public:
    IntensiveSpace(CellType type, std::size_t num_nodes, std::size_t k, std::vector<Slot> slots);

    CellType cell_type() const { return type_; }
    std::size_t num_nodes() const { return num_nodes_; }
    std::size_t num_intermediate() const { return num_nodes_ - 3; }
    std::size_t k() const { return k_; }
    std::size_t size() const { return slots_.size(); }
    std::span<const Slot> slots() const { return slots_; }
    std::size_t slot_offset(std::size_t node) const { return (node - 2) * k_; }
    std::span<const Slot> node_slots(std::size_t node) const;
    bool contains(const Slot& slot) const;

    /// Lines `cell_type node source op_name`, sorted lexicographically.
    std::string to_text() const;

    bool operator==(const IntensiveSpace&) const = default;

private:
    CellType type_;
    std::size_t num_nodes_;
    std::size_t k_;
    std::vector<Slot> slots_;
};

std::string spaces_to_text(std::span<const IntensiveSpace> spaces);
/// Parses the text form; one space per cell type present, in first-seen order.
std::vector<IntensiveSpace> spaces_from_text(std::string_view text);

/// Ranks every (edge, non-zero op) candidate of each intermediate node by its
/// edge-softmax probability (zero included in the normalization) and keeps
/// the top K. Ties go to the lower source index, then enumeration order.
IntensiveSpace select_topk_ops(std::span<const Tensor> alpha_edges, const CellSpec& cell, std::size_t k);

/// 1 - C/(M_int*K) with C = |prev Δ cur| / 2 over (node, source, op) triples.
double stability(const IntensiveSpace& prev, const IntensiveSpace& cur);

struct TrajectoryEntry {
    IntensiveSpace normal;
    IntensiveSpace reduce;
    double val_accuracy = 0;

    const IntensiveSpace& space(CellType type) const { return type == CellType::normal ? normal : reduce; }
};

struct SpaceTrajectory {
    std::vector<TrajectoryEntry> epochs;

    std::string to_text() const;
    static SpaceTrajectory from_text(std::string_view text);
};

/// Π_{0<=i<=n} s(O_{t-i}, O_t) · acc_{t-i}.
double superiority(std::span<const IntensiveSpace> spaces, std::span<const double> accuracies, std::size_t t,
                   std::size_t n);
double superiority(const SpaceTrajectory& trajectory, CellType type, std::size_t t, std::size_t n);

/// Evaluates one slot's operation on its source node value.
using SlotEvaluator = std::function<Tensor(const Slot& slot, std::size_t slot_index, const Tensor& source)>;

/// Value of intermediate node `node`: Σ over its K slots of
/// softmax(alpha_cell[node's slots]) · op(N_source).
Tensor relaxed_intensive_forward(std::span<const Tensor> node_values, const IntensiveSpace& space, std::size_t node,
                                 const Tensor& alpha_cell, const SlotEvaluator& evaluate);

struct DeriveOptions {
    std::size_t epochs = 30;
    std::size_t k = 6;
    std::size_t lookback = 2;
    std::size_t batch_size = 64;
    Scalar weight_lr = 0.025;
    SgdOptions sgd{};
    Scalar alpha_lr = 3e-4;
    AdamOptions adam{0.5, 0.999, 1e-8, 1e-3};
};

struct DerivationResult {
    IntensiveSpace normal;
    IntensiveSpace reduce;
    SpaceTrajectory trajectory;
    std::size_t best_epoch = 0;
    std::vector<double> mean_superiority;  // per epoch; NaN before `lookback`
};

/// First-order alternating optimization of the original-space supernet
/// (weights by SGD on train, alpha by Adam on val). After every epoch the
/// top-K spaces and the supernet's validation accuracy are recorded; the
/// returned spaces come from the eligible epoch with the highest mean
/// superiority over both cell types (latest epoch on ties).
DerivationResult derive_intensive_space(const BackboneSpec& backbone, const Dataset& data, const DeriveOptions& options,
                                        std::uint64_t seed, const EpochCallback& on_epoch = {});

}  // namespace hypernas
