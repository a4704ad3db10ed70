// Copyright 2026 The hypernas Authors
// SPDX-License-Identifier: Apache-2.0

#include "hypernas/search_space.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "hypernas/ops.hpp"

namespace hypernas {

namespace {

constexpr std::array<std::string_view, kNumOperations> kOpNames = {
    "sep_conv_3x3", "sep_conv_5x5", "dil_conv_3x3", "dil_conv_5x5",
    "avg_pool_3x3", "max_pool_3x3", "identity",     "zero",
};

struct ConvGeometryOf {
    std::size_t kernel;
    std::size_t dilation;
};

ConvGeometryOf conv_geometry(OperationKind op) {
    switch (op) {
        case OperationKind::sep_conv_3x3: return {3, 1};
        case OperationKind::sep_conv_5x5: return {5, 1};
        case OperationKind::dil_conv_3x3: return {3, 2};
        case OperationKind::dil_conv_5x5: return {5, 2};
        default: throw std::invalid_argument(fmt::format("{} has no convolution", op_name(op)));
    }
}

}  // namespace

std::string_view op_name(OperationKind op) { return kOpNames.at(static_cast<std::size_t>(op)); }

OperationKind op_from_name(std::string_view name) {
    for (std::size_t i = 0; i < kNumOperations; ++i) {
        if (kOpNames[i] == name) return kAllOperations[i];
    }
    throw std::invalid_argument(fmt::format("unknown operation '{}'", name));
}

bool is_conv(OperationKind op) {
    return op == OperationKind::sep_conv_3x3 || op == OperationKind::sep_conv_5x5 ||
           op == OperationKind::dil_conv_3x3 || op == OperationKind::dil_conv_5x5;
}

std::vector<Shape> kernel_stages(OperationKind op, std::size_t channels) {
    if (!is_conv(op)) return {};
    const auto [k, dil] = conv_geometry(op);
    return {Shape{channels, 1, k, k}, Shape{channels, channels, 1, 1}};
}

std::string_view cell_type_name(CellType type) { return type == CellType::normal ? "normal" : "reduce"; }

CellType cell_type_from_name(std::string_view name) {
    if (name == "normal") return CellType::normal;
    if (name == "reduce") return CellType::reduce;
    throw std::invalid_argument(fmt::format("unknown cell type '{}'", name));
}

std::size_t CellSpec::num_edges() const { return (num_nodes - 2) * (num_nodes - 1) / 2 - 1; }

std::size_t CellSpec::edge_index(std::size_t source, std::size_t node) const {
    if (node < 2 || node >= output_node() || source >= node) {
        throw std::out_of_range(fmt::format("no edge ({}, {}) in a {}-node cell", source, node, num_nodes));
    }
    return (node - 1) * node / 2 - 1 + source;
}

void CellSpec::validate() const {
    if (num_nodes < 4) {
        throw std::invalid_argument(fmt::format("cell needs at least 4 nodes, got {}", num_nodes));
    }
}

std::vector<Tensor> AlphaOriginal::all() const {
    std::vector<Tensor> out(normal.begin(), normal.end());
    out.insert(out.end(), reduce.begin(), reduce.end());
    return out;
}

AlphaOriginal alpha_init(const CellSpec& spec, Rng& rng) {
    spec.validate();
    AlphaOriginal alpha;
    for (auto* set : {&alpha.normal, &alpha.reduce}) {
        for (std::size_t e = 0; e < spec.num_edges(); ++e) {
            std::vector<Scalar> v(kNumOperations);
            for (auto& x : v) x = 1e-3 * rng.normal();
            set->emplace_back(Shape{kNumOperations}, std::move(v), true);
        }
    }
    return alpha;
}

std::vector<std::size_t> BackboneSpec::reduction_positions() const {
    std::vector<std::size_t> pos{num_cells / 3, 2 * num_cells / 3};
    pos.erase(std::unique(pos.begin(), pos.end()), pos.end());
    return pos;
}

bool BackboneSpec::is_reduction(std::size_t cell) const {
    const auto pos = reduction_positions();
    return std::find(pos.begin(), pos.end(), cell) != pos.end();
}

void BackboneSpec::validate() const {
    if (num_cells == 0) throw std::invalid_argument("backbone: need at least one cell");
    if (channels == 0 || channels % 2 != 0) {
        throw std::invalid_argument(fmt::format("backbone: channels must be positive and even, got {}", channels));
    }
    if (num_classes < 2) throw std::invalid_argument("backbone: need at least two classes");
    CellSpec{num_nodes}.validate();
    std::size_t s = image_size;
    for (std::size_t r = 0; r < reduction_positions().size(); ++r) {
        if (s < 2 || s % 2 != 0) {
            throw std::invalid_argument(
                fmt::format("backbone: spatial size {} exhausted by {} stride-2 reductions", image_size,
                            reduction_positions().size()));
        }
        s /= 2;
    }
}

std::vector<CellLayout> backbone_layout(const BackboneSpec& spec) {
    spec.validate();
    std::vector<CellLayout> out;
    const std::size_t stem = spec.stem_multiplier * spec.channels;
    std::size_t c_pp = stem, c_p = stem, c_cur = spec.channels, spatial = spec.image_size;
    bool reduce_prev = false;
    for (std::size_t l = 0; l < spec.num_cells; ++l) {
        const bool reduce = spec.is_reduction(l);
        if (reduce) c_cur *= 2;
        out.push_back({reduce ? CellType::reduce : CellType::normal, c_pp, c_p, c_cur, reduce_prev, spatial});
        if (reduce) spatial /= 2;
        reduce_prev = reduce;
        c_pp = c_p;
        c_p = (spec.num_nodes - 3) * c_cur;
    }
    return out;
}

void validate_network_input(const Tensor& x, const BackboneSpec& spec) {
    if (x.rank() != 4 || x.dim(1) != spec.in_channels) {
        throw std::invalid_argument(fmt::format("network input {} is not [N,{},H,W]", shape_str(x.shape()),
                                                spec.in_channels));
    }
    for (std::size_t axis : {2, 3}) {
        std::size_t s = x.dim(axis);
        for (std::size_t r = 0; r < spec.reduction_positions().size(); ++r) {
            if (s < 2 || s % 2 != 0) {
                throw std::invalid_argument(fmt::format("network input extent {} (axis {}) exhausted by stride-2 reductions",
                                                        x.dim(axis), axis));
            }
            s /= 2;
        }
    }
}

Shape operation_output_shape(const Shape& input, std::size_t stride) {
    if (input.size() != 4) throw std::invalid_argument("operation input must be NCHW");
    return {input[0], input[1], (input[2] + stride - 1) / stride, (input[3] + stride - 1) / stride};
}

Tensor apply_operation(OperationKind op, const Tensor& x, std::size_t stride, const OpKernels& kernels) {
    switch (op) {
        case OperationKind::avg_pool_3x3: return pool2d(x, PoolKind::avg, {3, stride, 1});
        case OperationKind::max_pool_3x3: return pool2d(x, PoolKind::max, {3, stride, 1});
        case OperationKind::identity: return stride == 1 ? x : subsample2d(x, stride);
        case OperationKind::zero: return Tensor::zeros(operation_output_shape(x.shape(), stride));
        default: break;
    }
    const auto [k, dil] = conv_geometry(op);
    const std::size_t c = x.dim(1);
    if (!kernels.depthwise.defined() || !kernels.pointwise.defined()) {
        throw std::invalid_argument(fmt::format("{}: missing kernels", op_name(op)));
    }
    const auto stages = kernel_stages(op, c);
    if (kernels.depthwise.shape() != stages[0] || kernels.pointwise.shape() != stages[1]) {
        throw std::invalid_argument(fmt::format("{}: kernels {} / {} do not fit {} channels (expected {} / {})",
                                                op_name(op), shape_str(kernels.depthwise.shape()),
                                                shape_str(kernels.pointwise.shape()), c, shape_str(stages[0]),
                                                shape_str(stages[1])));
    }
    Tensor h = relu(x);
    h = conv2d(h, kernels.depthwise, {stride, dil * (k - 1) / 2, dil, c});
    h = conv2d(h, kernels.pointwise);
    return batch_standardize(h);
}

Tensor mixed_edge_forward(const Tensor& node_value, const Tensor& alpha_edge, std::size_t stride,
                          const KernelLookup& kernels) {
    if (alpha_edge.rank() != 1 || alpha_edge.numel() != kNumOperations) {
        throw std::invalid_argument(fmt::format("mixed edge: alpha has shape {}, expected [{}]",
                                                shape_str(alpha_edge.shape()), kNumOperations));
    }
    const Tensor weights = softmax(alpha_edge, 0);
    std::vector<Tensor> outputs;
    outputs.reserve(kNumOperations);
    for (OperationKind op : kAllOperations) {
        static const OpKernels kNone{};
        outputs.push_back(apply_operation(op, node_value, stride, is_conv(op) ? kernels(op) : kNone));
    }
    return weighted_sum(outputs, weights);
}

Tensor Preprocess::forward(const Tensor& x) const {
    const Tensor h = relu(x);
    if (!factorized) return batch_standardize(conv2d(h, weight));
    const Tensor parts[] = {conv2d(h, weight, {.stride = 2}), conv2d(crop2d(h, 1, 1), weight_shifted, {.stride = 2})};
    return batch_standardize(concat_channels(parts));
}

Tensor init_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<Scalar> v(shape_numel(shape));
    for (auto& x : v) x = rng.uniform(-bound, bound);
    return Tensor(std::move(shape), std::move(v), true);
}

BackboneParams BackboneParams::init(const BackboneSpec& spec, Rng& rng) {
    const auto layout = backbone_layout(spec);
    BackboneParams p;
    p.stem = init_uniform({spec.stem_multiplier * spec.channels, spec.in_channels, 3, 3}, spec.in_channels * 9, rng);
    for (const auto& cell : layout) {
        std::array<Preprocess, 2> pre;
        if (cell.reduce_prev) {
            pre[0].factorized = true;
            pre[0].weight = init_uniform({cell.c_cell / 2, cell.c_prev_prev, 1, 1}, cell.c_prev_prev, rng);
            pre[0].weight_shifted = init_uniform({cell.c_cell / 2, cell.c_prev_prev, 1, 1}, cell.c_prev_prev, rng);
        } else {
            pre[0].weight = init_uniform({cell.c_cell, cell.c_prev_prev, 1, 1}, cell.c_prev_prev, rng);
        }
        pre[1].weight = init_uniform({cell.c_cell, cell.c_prev, 1, 1}, cell.c_prev, rng);
        p.preprocess.push_back(std::move(pre));
    }
    const std::size_t features = (spec.num_nodes - 3) * layout.back().c_cell;
    p.classifier_weight = init_uniform({spec.num_classes, features}, features, rng);
    p.classifier_bias = init_uniform({spec.num_classes}, features, rng);
    return p;
}

NamedTensors BackboneParams::named() const {
    NamedTensors out{{"stem.weight", stem}};
    for (std::size_t l = 0; l < preprocess.size(); ++l) {
        for (std::size_t k = 0; k < 2; ++k) {
            out.emplace_back(fmt::format("cell{}.pre{}.weight", l, k), preprocess[l][k].weight);
            if (preprocess[l][k].factorized) {
                out.emplace_back(fmt::format("cell{}.pre{}.weight_shifted", l, k), preprocess[l][k].weight_shifted);
            }
        }
    }
    out.emplace_back("classifier.weight", classifier_weight);
    out.emplace_back("classifier.bias", classifier_bias);
    return out;
}

Tensor BackboneParams::stem_forward(const Tensor& x) const {
    if (x.rank() != 4 || x.dim(1) != stem.dim(1)) {
        throw std::invalid_argument(fmt::format("network input {} does not match stem input channels {}",
                                                shape_str(x.shape()), stem.dim(1)));
    }
    return batch_standardize(conv2d(x, stem, {.padding = 1}));
}

Tensor BackboneParams::classify(const Tensor& features) const {
    return fully_connected(global_avg_pool(features), classifier_weight, classifier_bias);
}

Tensor cell_forward(const Tensor& s0, const Tensor& s1, const CellSpec& spec, std::span<const Tensor> alpha_edges,
                    const std::function<const OpKernels&(std::size_t edge, OperationKind op)>& kernels) {
    spec.validate();
    if (s0.shape() != s1.shape()) {
        throw std::invalid_argument(fmt::format("cell: preprocessed inputs disagree, {} vs {}", shape_str(s0.shape()),
                                                shape_str(s1.shape())));
    }
    if (alpha_edges.size() != spec.num_edges()) {
        throw std::invalid_argument(
            fmt::format("cell: {} alpha vectors for {} edges", alpha_edges.size(), spec.num_edges()));
    }
    std::vector<Tensor> states{s0, s1};
    for (std::size_t j = 2; j < spec.output_node(); ++j) {
        std::vector<Tensor> terms;
        for (std::size_t i = 0; i < j; ++i) {
            const std::size_t e = spec.edge_index(i, j);
            const std::size_t stride = spec.type == CellType::reduce && i < 2 ? 2 : 1;
            terms.push_back(mixed_edge_forward(states[i], alpha_edges[e], stride,
                                               [&](OperationKind op) -> const OpKernels& { return kernels(e, op); }));
        }
        states.push_back(add_all(terms));
    }
    return concat_channels(std::span(states).subspan(2));
}

Supernet::Supernet(BackboneSpec spec, Rng& init_rng)
    : spec_(spec), layout_(backbone_layout(spec_)), backbone_(BackboneParams::init(spec_, init_rng)) {
    const CellSpec cell{spec_.num_nodes};
    for (const auto& lay : layout_) {
        std::vector<std::array<OpKernels, kNumOperations>> edges(cell.num_edges());
        for (auto& edge : edges) {
            for (OperationKind op : kAllOperations) {
                const auto stages = kernel_stages(op, lay.c_cell);
                if (stages.empty()) continue;
                auto& k = edge[static_cast<std::size_t>(op)];
                k.depthwise = init_uniform(stages[0], shape_numel(stages[0]) / lay.c_cell, init_rng);
                k.pointwise = init_uniform(stages[1], lay.c_cell, init_rng);
            }
        }
        kernels_.push_back(std::move(edges));
    }
}

Tensor Supernet::forward(const Tensor& x, const AlphaOriginal& alpha) const {
    validate_network_input(x, spec_);
    Tensor s0 = backbone_.stem_forward(x);
    Tensor s1 = s0;
    for (std::size_t l = 0; l < layout_.size(); ++l) {
        const CellSpec cell{spec_.num_nodes, layout_[l].type};
        const Tensor p0 = backbone_.preprocess[l][0].forward(s0);
        const Tensor p1 = backbone_.preprocess[l][1].forward(s1);
        const auto& edges = kernels_[l];
        Tensor out = cell_forward(p0, p1, cell, alpha.for_type(cell.type),
                                  [&](std::size_t e, OperationKind op) -> const OpKernels& {
                                      return edges[e][static_cast<std::size_t>(op)];
                                  });
        s0 = s1;
        s1 = out;
    }
    return backbone_.classify(s1);
}

NamedTensors Supernet::named_parameters() const {
    NamedTensors out = backbone_.named();
    for (std::size_t l = 0; l < kernels_.size(); ++l) {
        for (std::size_t e = 0; e < kernels_[l].size(); ++e) {
            for (OperationKind op : kAllOperations) {
                const auto& k = kernels_[l][e][static_cast<std::size_t>(op)];
                if (!k.depthwise.defined()) continue;
                out.emplace_back(fmt::format("cell{}.edge{}.{}.depthwise", l, e, op_name(op)), k.depthwise);
                out.emplace_back(fmt::format("cell{}.edge{}.{}.pointwise", l, e, op_name(op)), k.pointwise);
            }
        }
    }
    return out;
}

Tensor network_forward(const Tensor& x, const Supernet& net, const AlphaOriginal& alpha) {
    return net.forward(x, alpha);
}

}  // namespace hypernas
