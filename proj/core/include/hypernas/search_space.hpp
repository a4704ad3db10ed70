// Copyright 2026 The hypernas Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "hypernas/rng.hpp"
#include "hypernas/tensor.hpp"

namespace hypernas {

// Candidate operations on a cell edge. Enumeration order is the tie-break
// order everywhere operations are ranked.
enum class OperationKind : std::uint8_t {
    sep_conv_3x3,
    sep_conv_5x5,
    dil_conv_3x3,
    dil_conv_5x5,
    avg_pool_3x3,
    max_pool_3x3,
    identity,
    zero,
};

inline constexpr std::size_t kNumOperations = 8;
inline constexpr std::array<OperationKind, kNumOperations> kAllOperations = {
    OperationKind::sep_conv_3x3, OperationKind::sep_conv_5x5, OperationKind::dil_conv_3x3,
    OperationKind::dil_conv_5x5, OperationKind::avg_pool_3x3, OperationKind::max_pool_3x3,
    OperationKind::identity,     OperationKind::zero,
};

std::string_view op_name(OperationKind op);
OperationKind op_from_name(std::string_view name);
bool is_conv(OperationKind op);

/// Kernel shapes of a conv op's stages at `channels` in/out: depthwise
/// [C,1,k,k] then pointwise [C,C,1,1]. Empty for parameter-free ops.
std::vector<Shape> kernel_stages(OperationKind op, std::size_t channels);

enum class CellType : std::uint8_t { normal, reduce };

std::string_view cell_type_name(CellType type);
CellType cell_type_from_name(std::string_view name);

/// Node layout of one cell: inputs {0,1}, intermediates {2..M-2}, output M-1.
struct CellSpec {
    std::size_t num_nodes = 7;
    CellType type = CellType::normal;

    std::size_t num_intermediate() const { return num_nodes - 3; }
    std::size_t output_node() const { return num_nodes - 1; }
    /// Edges (i, j) with i < j for every intermediate node j.
    std::size_t num_edges() const;
    std::size_t edge_index(std::size_t source, std::size_t node) const;
    void validate() const;
};

/// Per-edge mixing logits of the original space, one vector of length
/// kNumOperations per edge, shared by all cells of a type.
struct AlphaOriginal {
    std::vector<Tensor> normal;
    std::vector<Tensor> reduce;

    const std::vector<Tensor>& for_type(CellType type) const { return type == CellType::normal ? normal : reduce; }
    std::vector<Tensor> all() const;
};

/// Each entry is 1e-3 * N(0,1) from the given generator.
AlphaOriginal alpha_init(const CellSpec& spec, Rng& rng);

struct BackboneSpec {
    std::size_t num_cells = 4;
    std::size_t channels = 8;
    std::size_t num_nodes = 7;
    std::size_t stem_multiplier = 3;
    std::size_t in_channels = 3;
    std::size_t num_classes = 4;
    std::size_t image_size = 8;

    /// {floor(L/3), floor(2L/3)}, deduplicated for very shallow nets.
    std::vector<std::size_t> reduction_positions() const;
    bool is_reduction(std::size_t cell) const;
    void validate() const;
};

/// Channel/resolution bookkeeping for one cell of the backbone.
struct CellLayout {
    CellType type = CellType::normal;
    std::size_t c_prev_prev = 0;
    std::size_t c_prev = 0;
    std::size_t c_cell = 0;
    bool reduce_prev = false;  // input 0 must be spatially reduced to match input 1
    std::size_t spatial = 0;   // resolution of the cell inputs (after preprocessing)
};

std::vector<CellLayout> backbone_layout(const BackboneSpec& spec);

/// Rejects inputs whose channel count or spatial extent the backbone cannot
/// consume (including extents exhausted by the stride-2 reductions).
void validate_network_input(const Tensor& x, const BackboneSpec& spec);

/// Convolution kernels of one op instance; undefined for parameter-free ops.
struct OpKernels {
    Tensor depthwise;
    Tensor pointwise;
};

/// One candidate operation applied to a node value. Conv ops run
/// ReLU -> depthwise -> pointwise -> batch standardization.
Tensor apply_operation(OperationKind op, const Tensor& x, std::size_t stride, const OpKernels& kernels);

Shape operation_output_shape(const Shape& input, std::size_t stride);

using KernelLookup = std::function<const OpKernels&(OperationKind)>;

/// Σ_o softmax(alpha_edge)_o · o(node_value).
Tensor mixed_edge_forward(const Tensor& node_value, const Tensor& alpha_edge, std::size_t stride,
                          const KernelLookup& kernels);

/// Input preprocessing of a cell: ReLU -> 1x1 conv -> standardize, or the
/// factorized stride-2 variant (two half-width 1x1 convs on offset grids).
struct Preprocess {
    bool factorized = false;
    Tensor weight;          // [C_out, C_in, 1, 1]
    Tensor weight_shifted;  // factorized only: [C_out/2, C_in, 1, 1]

    Tensor forward(const Tensor& x) const;
};

/// Stem, per-cell preprocessing and classifier: the ordinary trainable
/// weights surrounding the cells.
struct BackboneParams {
    Tensor stem;  // [stem_multiplier*C, in_channels, 3, 3]
    std::vector<std::array<Preprocess, 2>> preprocess;
    Tensor classifier_weight;
    Tensor classifier_bias;

    static BackboneParams init(const BackboneSpec& spec, Rng& rng);
    NamedTensors named() const;
    Tensor stem_forward(const Tensor& x) const;
    Tensor classify(const Tensor& features) const;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization.
Tensor init_uniform(Shape shape, std::size_t fan_in, Rng& rng);

/// Output of one cell: each intermediate node sums its incoming mixed edges;
/// the result concatenates the intermediates along channels. `s0`/`s1` are
/// the already-preprocessed inputs.
Tensor cell_forward(const Tensor& s0, const Tensor& s1, const CellSpec& spec, std::span<const Tensor> alpha_edges,
                    const std::function<const OpKernels&(std::size_t edge, OperationKind op)>& kernels);

/// Continuous relaxation of the original space over a stacked backbone with
/// ordinary trainable conv weights on every edge.
class Supernet {
public:
    Supernet(BackboneSpec spec, Rng& init_rng);

    Tensor forward(const Tensor& x, const AlphaOriginal& alpha) const;
    NamedTensors named_parameters() const;
    std::vector<Tensor> parameters() const { return tensors_of(named_parameters()); }
    const BackboneSpec& spec() const { return spec_; }
    const std::vector<CellLayout>& layout() const { return layout_; }

private:
    BackboneSpec spec_;
    std::vector<CellLayout> layout_;
    BackboneParams backbone_;
    std::vector<std::vector<std::array<OpKernels, kNumOperations>>> kernels_;  // [cell][edge][op]
};

Tensor network_forward(const Tensor& x, const Supernet& net, const AlphaOriginal& alpha);

}  // namespace hypernas
