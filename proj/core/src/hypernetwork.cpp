// Copyright 2026 The hypernas Authors
// SPDX-License-Identifier: Apache-2.0

#include "hypernas/hypernetwork.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

#include "hypernas/ops.hpp"

namespace hypernas {

ArchParams ArchParams::clone(bool requires_grad) const {
    ArchParams out;
    for (const auto& a : cells) {
        out.cells.emplace_back(a.shape(), std::vector<Scalar>(a.data().begin(), a.data().end()), requires_grad);
    }
    return out;
}

Tensor encode_cell_probabilities(const Tensor& alpha_cell) {
    if (alpha_cell.rank() != 1) throw std::invalid_argument("encode_cell_probabilities: alpha must be 1-D");
    return softmax(alpha_cell, 0);
}

GeneratorStage::GeneratorStage(Tensor w1, Tensor b1, Tensor w2, Tensor b2, Shape target_shape)
    : fc1_weight(std::move(w1)),
      fc1_bias(std::move(b1)),
      fc2_weight(std::move(w2)),
      fc2_bias(std::move(b2)),
      target(std::move(target_shape)) {
    const std::size_t e = shape_numel(target);
    if (fc1_weight.shape() != Shape{kGeneratorHidden, 1} || fc1_bias.shape() != Shape{kGeneratorHidden}) {
        throw std::invalid_argument(fmt::format("generating block: FC1 must be [{},1] + [{}], got {} + {}",
                                                kGeneratorHidden, kGeneratorHidden, shape_str(fc1_weight.shape()),
                                                shape_str(fc1_bias.shape())));
    }
    if (fc2_weight.shape() != Shape{e, kGeneratorHidden} || fc2_bias.shape() != Shape{e}) {
        throw std::invalid_argument(fmt::format("generating block: FC2 output {} does not match kernel {} ({} elements)",
                                                shape_str(fc2_weight.shape()), shape_str(target), e));
    }
}

GeneratorStage GeneratorStage::init(Shape target, Rng& rng) {
    const std::size_t e = shape_numel(target);
    const double he = std::sqrt(6.0);  // fan_in 1
    std::vector<Scalar> w1(kGeneratorHidden);
    for (auto& v : w1) v = rng.uniform(-he, he);
    std::vector<Scalar> b1(kGeneratorHidden, 0.0);
    const double w2_bound = 1.0 / std::sqrt(static_cast<double>(kGeneratorHidden * e));
    std::vector<Scalar> w2(e * kGeneratorHidden);
    for (auto& v : w2) v = rng.uniform(-w2_bound, w2_bound);
    const std::size_t kernel_fan_in = e / target[0];
    const double b2_bound = 1.0 / std::sqrt(static_cast<double>(kernel_fan_in));
    std::vector<Scalar> b2(e);
    for (auto& v : b2) v = rng.uniform(-b2_bound, b2_bound);
    return GeneratorStage(Tensor({kGeneratorHidden, 1}, std::move(w1), true), Tensor({kGeneratorHidden}, std::move(b1), true),
                          Tensor({e, kGeneratorHidden}, std::move(w2), true), Tensor({e}, std::move(b2), true),
                          std::move(target));
}

Tensor generating_block_forward(const Tensor& p_op, const GeneratorStage& stage) {
    if (p_op.numel() != 1) throw std::invalid_argument("generating_block_forward: input must be a single probability");
    const Tensor p = reshape(p_op, {1, 1});
    const Tensor hidden = relu(fully_connected(p, stage.fc1_weight, stage.fc1_bias));
    const Tensor flat = fully_connected(hidden, stage.fc2_weight, stage.fc2_bias);
    return reshape(flat, stage.target);
}

OpKernels generate_kernels(const Tensor& p_op, const GeneratingBlock& block) {
    if (block.stages.size() != 2) {
        throw std::invalid_argument(fmt::format("generate_kernels: {} expects 2 kernel stages, block has {}",
                                                op_name(block.op), block.stages.size()));
    }
    return OpKernels{generating_block_forward(p_op, block.stages[0]), generating_block_forward(p_op, block.stages[1])};
}

Tensor convblock_forward(const Tensor& input, const OpKernels& generated, OperationKind op, std::size_t stride) {
    if (!is_conv(op)) throw std::invalid_argument(fmt::format("convblock_forward: {} is not a conv op", op_name(op)));
    return apply_operation(op, input, stride, generated);
}

HyperNetwork::HyperNetwork(BackboneSpec spec, IntensiveSpace normal, IntensiveSpace reduce, Rng& init_rng)
    : spec_(spec),
      layout_(backbone_layout(spec_)),
      normal_(std::move(normal)),
      reduce_(std::move(reduce)),
      backbone_(BackboneParams::init(spec_, init_rng)) {
    if (normal_.cell_type() != CellType::normal || reduce_.cell_type() != CellType::reduce) {
        throw std::invalid_argument("hypernetwork: expected a normal and a reduce intensive space");
    }
    for (const auto* s : {&normal_, &reduce_}) {
        if (s->num_nodes() != spec_.num_nodes) {
            throw std::invalid_argument(fmt::format("hypernetwork: {} space has M = {}, backbone has M = {}",
                                                    cell_type_name(s->cell_type()), s->num_nodes(), spec_.num_nodes));
        }
    }
    for (std::size_t l = 0; l < layout_.size(); ++l) {
        const auto& sp = space(layout_[l].type);
        std::vector<std::optional<std::size_t>> index(sp.size());
        for (std::size_t s = 0; s < sp.size(); ++s) {
            const OperationKind op = sp.slots()[s].op;
            const auto shapes = kernel_stages(op, layout_[l].c_cell);
            if (shapes.empty()) continue;
            GeneratingBlock block{l, s, op, {}};
            for (const auto& shape : shapes) block.stages.push_back(GeneratorStage::init(shape, init_rng));
            index[s] = blocks_.size();
            blocks_.push_back(std::move(block));
        }
        block_index_.push_back(std::move(index));
    }
    if (num_kernel_stages() != count_conv_kernel_stages(*this)) {
        throw std::logic_error("hypernetwork: generating blocks do not match the conv kernel stages one-to-one");
    }
}

std::size_t HyperNetwork::num_kernel_stages() const {
    std::size_t n = 0;
    for (const auto& b : blocks_) n += b.stages.size();
    return n;
}

std::size_t count_conv_kernel_stages(const HyperNetwork& net) {
    std::size_t n = 0;
    for (std::size_t l = 0; l < net.layout().size(); ++l) {
        for (const auto& slot : net.cell_space(l).slots()) n += kernel_stages(slot.op, net.layout()[l].c_cell).size();
    }
    return n;
}

Tensor HyperNetwork::cell_forward(
    std::size_t cell, const Tensor& s0, const Tensor& s1, const Tensor& generation_probs,
    const std::function<Tensor(std::span<const Tensor>, std::size_t, const SlotEvaluator&)>& node_mix) const {
    const auto& lay = layout_[cell];
    const auto& sp = space(lay.type);
    if (generation_probs.numel() != sp.size()) {
        throw std::invalid_argument(fmt::format("hypernetwork: cell {} expects {} generation probabilities, got {}", cell,
                                                sp.size(), generation_probs.numel()));
    }
    const bool reduce = lay.type == CellType::reduce;
    const SlotEvaluator evaluate = [&](const Slot& slot, std::size_t index, const Tensor& source) {
        const std::size_t stride = reduce && slot.source < 2 ? 2 : 1;
        const auto& block = block_index_[cell][index];
        if (!block) return apply_operation(slot.op, source, stride, OpKernels{});
        const std::size_t at[] = {index};
        const OpKernels kernels = generate_kernels(gather(generation_probs, at), blocks_[*block]);
        return convblock_forward(source, kernels, slot.op, stride);
    };
    std::vector<Tensor> nodes{s0, s1};
    for (std::size_t j = 2; j + 1 < spec_.num_nodes; ++j) nodes.push_back(node_mix(nodes, j, evaluate));
    return concat_channels(std::span<const Tensor>(nodes).subspan(2));
}

Tensor HyperNetwork::forward(const Tensor& x, const ArchParams& arch) const {
    if (arch.num_cells() != layout_.size()) {
        throw std::invalid_argument(
            fmt::format("hypernetwork: {} alpha vectors for {} cells", arch.num_cells(), layout_.size()));
    }
    validate_network_input(x, spec_);
    Tensor s0 = backbone_.stem_forward(x);
    Tensor s1 = s0;
    for (std::size_t l = 0; l < layout_.size(); ++l) {
        const auto& sp = space(layout_[l].type);
        const Tensor& alpha = arch.cells[l];
        if (alpha.rank() != 1 || alpha.numel() != sp.size()) {
            throw std::invalid_argument(fmt::format("hypernetwork: cell {} alpha has shape {}, space has {} slots", l,
                                                    shape_str(alpha.shape()), sp.size()));
        }
        const Tensor probs = encode_cell_probabilities(alpha);
        const Tensor a = backbone_.preprocess[l][0].forward(s0);
        const Tensor b = backbone_.preprocess[l][1].forward(s1);
        Tensor out = cell_forward(l, a, b, probs, [&](std::span<const Tensor> nodes, std::size_t j, const SlotEvaluator& ev) {
            return relaxed_intensive_forward(nodes, sp, j, alpha, ev);
        });
        s0 = std::move(s1);
        s1 = std::move(out);
    }
    return backbone_.classify(s1);
}

Tensor HyperNetwork::forward(const Tensor& x, std::span<const CellRouting> routing) const {
    if (routing.size() != layout_.size()) {
        throw std::invalid_argument(fmt::format("hypernetwork: {} routings for {} cells", routing.size(), layout_.size()));
    }
    validate_network_input(x, spec_);
    const std::size_t m_int = spec_.num_nodes - 3;
    Tensor s0 = backbone_.stem_forward(x);
    Tensor s1 = s0;
    for (std::size_t l = 0; l < layout_.size(); ++l) {
        const auto& r = routing[l];
        const auto& sp = space(layout_[l].type);
        if (r.active.size() != m_int || r.mixing.size() != m_int) {
            throw std::invalid_argument(fmt::format("hypernetwork: cell {} routing must cover {} nodes", l, m_int));
        }
        const Tensor a = backbone_.preprocess[l][0].forward(s0);
        const Tensor b = backbone_.preprocess[l][1].forward(s1);
        Tensor out = cell_forward(l, a, b, r.generation_probs,
                                  [&](std::span<const Tensor> nodes, std::size_t j, const SlotEvaluator& ev) {
                                      const auto& act = r.active[j - 2];
                                      if (act.empty() || r.mixing[j - 2].numel() != act.size()) {
                                          throw std::invalid_argument(fmt::format(
                                              "hypernetwork: cell {} node {} routing is empty or inconsistent", l, j));
                                      }
                                      std::vector<Tensor> terms;
                                      for (std::size_t idx : act) {
                                          if (idx >= sp.size() || sp.slots()[idx].node != j) {
                                              throw std::invalid_argument(fmt::format(
                                                  "hypernetwork: slot {} does not feed node {} of cell {}", idx, j, l));
                                          }
                                          const Slot& slot = sp.slots()[idx];
                                          terms.push_back(ev(slot, idx, nodes[slot.source]));
                                      }
                                      return weighted_sum(terms, r.mixing[j - 2]);
                                  });
        s0 = std::move(s1);
        s1 = std::move(out);
    }
    return backbone_.classify(s1);
}

NamedTensors HyperNetwork::named_parameters() const {
    NamedTensors out = backbone_.named();
    for (const auto& b : blocks_) {
        for (std::size_t s = 0; s < b.stages.size(); ++s) {
            const auto prefix = fmt::format("cell{}.slot{}.{}.{}", b.cell, b.slot, op_name(b.op), s == 0 ? "depthwise" : "pointwise");
            const auto& st = b.stages[s];
            out.emplace_back(prefix + ".fc1.weight", st.fc1_weight);
            out.emplace_back(prefix + ".fc1.bias", st.fc1_bias);
            out.emplace_back(prefix + ".fc2.weight", st.fc2_weight);
            out.emplace_back(prefix + ".fc2.bias", st.fc2_bias);
        }
    }
    return out;
}

namespace {

ArchParams draw_arch(const HyperNetwork& net, Rng* rng, Scalar scale, bool requires_grad) {
    ArchParams arch;
    for (std::size_t l = 0; l < net.layout().size(); ++l) {
        std::vector<Scalar> v(net.num_slots(l), 0.0);
        if (rng != nullptr) {
            for (auto& x : v) x = scale * rng->normal();
        }
        arch.cells.emplace_back(Shape{v.size()}, std::move(v), requires_grad);
    }
    return arch;
}

}  // namespace

ArchParams sample_random_alpha(const HyperNetwork& net, Rng& rng) { return draw_arch(net, &rng, 1.0, false); }

ArchParams arch_init(const HyperNetwork& net, Rng& rng) { return draw_arch(net, &rng, 1e-3, true); }

ArchParams arch_zeros(const HyperNetwork& net) { return draw_arch(net, nullptr, 0.0, false); }

}  // namespace hypernas
