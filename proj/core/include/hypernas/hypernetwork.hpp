// Copyright 2026 The hypernas Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hypernas/intensive_space.hpp"
#include "hypernas/rng.hpp"
#include "hypernas/search_space.hpp"

namespace hypernas {

inline constexpr std::size_t kGeneratorHidden = 64;

/// Independent per-cell architecture logits, one entry per intensive-space slot.
struct ArchParams {
    std::vector<Tensor> cells;

    std::size_t num_cells() const { return cells.size(); }
    ArchParams clone(bool requires_grad) const;
};

/// Softmax over a whole cell's slot logits.
Tensor encode_cell_probabilities(const Tensor& alpha_cell);

/// FC(1 -> 64) -> ReLU -> FC(64 -> E) producing one kernel stage of E elements.
struct GeneratorStage {
    Tensor fc1_weight;  // [64, 1]
    Tensor fc1_bias;    // [64]
    Tensor fc2_weight;  // [E, 64]
    Tensor fc2_bias;    // [E]
    Shape target;

    GeneratorStage() = default;
    /// Rejects parameter shapes inconsistent with `target`.
    GeneratorStage(Tensor w1, Tensor b1, Tensor w2, Tensor b2, Shape target);

    /// FC1 He-uniform; FC2 weight uniform within 1/sqrt(64*E); FC2 bias drawn
    /// like an ordinary conv kernel of `target` so generated kernels start at
    /// conv-init magnitude.
    static GeneratorStage init(Shape target, Rng& rng);
};

/// Maps the scalar probability p of one operation (a 1-element tensor) to a
/// kernel of the stage's target shape.
Tensor generating_block_forward(const Tensor& p_op, const GeneratorStage& stage);

/// Weight generator of one conv slot: one stage per kernel of the op.
struct GeneratingBlock {
    std::size_t cell = 0;
    std::size_t slot = 0;
    OperationKind op = OperationKind::zero;
    std::vector<GeneratorStage> stages;
};

/// Generated kernels of a slot, in OpKernels form.
OpKernels generate_kernels(const Tensor& p_op, const GeneratingBlock& block);

/// Runs a conv op with freshly generated kernels.
Tensor convblock_forward(const Tensor& input, const OpKernels& generated, OperationKind op, std::size_t stride);

/// How one cell is executed: the probability fed to each slot's generator,
/// the slots each node mixes, and the mixing weights over them.
struct CellRouting {
    Tensor generation_probs;                       // [num_slots]
    std::vector<std::vector<std::size_t>> active;  // per intermediate node, cell slot indices
    std::vector<Tensor> mixing;                    // per intermediate node, weights over `active`
};

/// Backbone of L cells over the intensive spaces. All conv weights of the
/// cells are generated from the architecture encoding on every forward.
class HyperNetwork {
public:
    HyperNetwork(BackboneSpec spec, IntensiveSpace normal, IntensiveSpace reduce, Rng& init_rng);

    const BackboneSpec& spec() const { return spec_; }
    const std::vector<CellLayout>& layout() const { return layout_; }
    const IntensiveSpace& space(CellType type) const { return type == CellType::normal ? normal_ : reduce_; }
    const IntensiveSpace& cell_space(std::size_t cell) const { return space(layout_.at(cell).type); }
    std::size_t num_slots(std::size_t cell) const { return cell_space(cell).size(); }

    /// Relaxed forward: per-cell softmax feeds the generators, per-node
    /// softmax mixes the slots.
    Tensor forward(const Tensor& x, const ArchParams& arch) const;
    /// Forward under explicit routing (one entry per cell).
    Tensor forward(const Tensor& x, std::span<const CellRouting> routing) const;

    /// Every trainable tensor grouped under w_G: stem, preprocessing,
    /// classifier and all generator FC layers.
    NamedTensors named_parameters() const;
    std::vector<Tensor> parameters() const { return tensors_of(named_parameters()); }

    const std::vector<GeneratingBlock>& generating_blocks() const { return blocks_; }
    std::size_t num_kernel_stages() const;

private:
    Tensor cell_forward(std::size_t cell, const Tensor& s0, const Tensor& s1, const Tensor& generation_probs,
                        const std::function<Tensor(std::span<const Tensor>, std::size_t, const SlotEvaluator&)>& node_mix)
        const;

    BackboneSpec spec_;
    std::vector<CellLayout> layout_;
    IntensiveSpace normal_;
    IntensiveSpace reduce_;
    BackboneParams backbone_;
    std::vector<GeneratingBlock> blocks_;
    std::vector<std::vector<std::optional<std::size_t>>> block_index_;  // [cell][slot] -> blocks_
};

/// Slot count of every conv kernel stage the network executes; equals
/// num_kernel_stages() by construction.
std::size_t count_conv_kernel_stages(const HyperNetwork& net);

/// Each α_l entry i.i.d. N(0,1); no gradient tracking.
ArchParams sample_random_alpha(const HyperNetwork& net, Rng& rng);
/// Each α_l entry 1e-3 · N(0,1), tracking gradients (search initialization).
ArchParams arch_init(const HyperNetwork& net, Rng& rng);
/// All-zero logits (uniform probabilities).
ArchParams arch_zeros(const HyperNetwork& net);

}  // namespace hypernas
