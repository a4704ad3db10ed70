// Copyright 2026 The hypernas Authors
// SPDX-License-Identifier: Apache-2.0

#include "hypernas/intensive_space.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "hypernas/ops.hpp"
#include "hypernas/rng.hpp"

namespace hypernas {

IntensiveSpace::IntensiveSpace(CellType type, std::size_t num_nodes, std::size_t k, std::vector<Slot> slots)
    : type_(type), num_nodes_(num_nodes), k_(k), slots_(std::move(slots)) {
    CellSpec{num_nodes, type}.validate();
    if (k == 0) throw std::invalid_argument("intensive space: K must be positive");
    std::sort(slots_.begin(), slots_.end());
    if (std::adjacent_find(slots_.begin(), slots_.end()) != slots_.end()) {
        throw std::invalid_argument("intensive space: duplicate slot");
    }
    std::vector<std::size_t> per_node(num_nodes, 0);
    for (const auto& s : slots_) {
        if (s.node < 2 || s.node > num_nodes - 2) {
            throw std::invalid_argument(fmt::format("intensive space: node {} is not intermediate", s.node));
        }
        if (s.source >= s.node) {
            throw std::invalid_argument(fmt::format("intensive space: source {} does not precede node {}", s.source, s.node));
        }
        if (s.op == OperationKind::zero) throw std::invalid_argument("intensive space: zero op cannot be retained");
        ++per_node[s.node];
    }
    for (std::size_t j = 2; j + 1 < num_nodes; ++j) {
        if (per_node[j] != k) {
            throw std::invalid_argument(
                fmt::format("intensive space: node {} has {} slots, expected K = {}", j, per_node[j], k));
        }
    }
}

std::span<const Slot> IntensiveSpace::node_slots(std::size_t node) const {
    if (node < 2 || node + 1 >= num_nodes_) throw std::out_of_range(fmt::format("intensive space: node {}", node));
    return std::span<const Slot>(slots_).subspan(slot_offset(node), k_);
}

bool IntensiveSpace::contains(const Slot& slot) const {
    return std::binary_search(slots_.begin(), slots_.end(), slot);
}

namespace {

std::vector<std::string> slot_lines(const IntensiveSpace& space) {
    std::vector<std::string> lines;
    for (const auto& s : space.slots()) {
        lines.push_back(fmt::format("{} {} {} {}", cell_type_name(space.cell_type()), s.node, s.source, op_name(s.op)));
    }
    return lines;
}

std::string join_sorted(std::vector<std::string> lines) {
    std::sort(lines.begin(), lines.end());
    std::string out;
    for (const auto& l : lines) {
        out += l;
        out += '\n';
    }
    return out;
}

std::size_t parse_index(const std::string& token, const std::string& line) {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(token, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != token.size() || token.empty() || token[0] == '-') {
        throw std::invalid_argument(fmt::format("bad index '{}' in line '{}'", token, line));
    }
    return static_cast<std::size_t>(v);
}

}  // namespace

std::string IntensiveSpace::to_text() const { return join_sorted(slot_lines(*this)); }

std::string spaces_to_text(std::span<const IntensiveSpace> spaces) {
    std::vector<std::string> lines;
    for (const auto& space : spaces) {
        auto l = slot_lines(space);
        lines.insert(lines.end(), l.begin(), l.end());
    }
    return join_sorted(std::move(lines));
}

std::vector<IntensiveSpace> spaces_from_text(std::string_view text) {
    std::vector<CellType> order;
    std::map<CellType, std::vector<Slot>> slots;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream fields(line);
        std::string type, node, source, op, extra;
        if (!(fields >> type >> node >> source >> op) || (fields >> extra)) {
            throw std::invalid_argument(fmt::format("space text: expected 4 fields in '{}'", line));
        }
        const CellType ct = cell_type_from_name(type);
        if (!slots.count(ct)) order.push_back(ct);
        slots[ct].push_back(Slot{parse_index(node, line), parse_index(source, line), op_from_name(op)});
    }
    std::vector<IntensiveSpace> out;
    for (CellType ct : order) {
        auto& s = slots[ct];
        std::size_t max_node = 0;
        std::map<std::size_t, std::size_t> counts;
        for (const auto& slot : s) {
            max_node = std::max(max_node, slot.node);
            ++counts[slot.node];
        }
        out.emplace_back(ct, max_node + 2, counts.begin()->second, std::move(s));
    }
    return out;
}

IntensiveSpace select_topk_ops(std::span<const Tensor> alpha_edges, const CellSpec& cell, std::size_t k) {
    cell.validate();
    if (alpha_edges.size() != cell.num_edges()) {
        throw std::invalid_argument(
            fmt::format("select_topk_ops: {} alpha edges for a cell with {} edges", alpha_edges.size(), cell.num_edges()));
    }
    const std::size_t nonzero = kNumOperations - 1;
    if (k == 0 || k > 2 * nonzero) {
        throw std::invalid_argument(
            fmt::format("select_topk_ops: K = {} exceeds the {} candidates of the first intermediate node", k, 2 * nonzero));
    }
    struct Candidate {
        Scalar prob;
        Slot slot;
    };
    std::vector<Slot> chosen;
    for (std::size_t j = 2; j + 1 < cell.num_nodes; ++j) {
        std::vector<Candidate> cands;
        for (std::size_t i = 0; i < j; ++i) {
            const Tensor& a = alpha_edges[cell.edge_index(i, j)];
            if (a.numel() != kNumOperations) throw std::invalid_argument("select_topk_ops: alpha edge must have 8 entries");
            const auto v = a.data();
            const Scalar mx = *std::max_element(v.begin(), v.end());
            Scalar z = 0;
            for (Scalar x : v) z += std::exp(x - mx);
            for (std::size_t o = 0; o < kNumOperations; ++o) {
                if (kAllOperations[o] == OperationKind::zero) continue;
                cands.push_back({std::exp(v[o] - mx) / z, Slot{j, i, kAllOperations[o]}});
            }
        }
        std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
            if (a.prob != b.prob) return a.prob > b.prob;
            return a.slot < b.slot;
        });
        for (std::size_t r = 0; r < k; ++r) chosen.push_back(cands[r].slot);
    }
    return IntensiveSpace(cell.type, cell.num_nodes, k, std::move(chosen));
}

double stability(const IntensiveSpace& prev, const IntensiveSpace& cur) {
    if (prev.cell_type() != cur.cell_type()) throw std::invalid_argument("stability: cell types differ");
    if (prev.num_nodes() != cur.num_nodes() || prev.k() != cur.k()) {
        throw std::invalid_argument(fmt::format("stability: dimensions differ (M {} vs {}, K {} vs {})", prev.num_nodes(),
                                                cur.num_nodes(), prev.k(), cur.k()));
    }
    std::vector<Slot> diff;
    std::set_symmetric_difference(prev.slots().begin(), prev.slots().end(), cur.slots().begin(), cur.slots().end(),
                                  std::back_inserter(diff));
    const double changed = static_cast<double>(diff.size()) / 2.0;
    return 1.0 - changed / static_cast<double>(cur.num_intermediate() * cur.k());
}

std::string SpaceTrajectory::to_text() const {
    std::string out;
    for (std::size_t t = 0; t < epochs.size(); ++t) {
        out += fmt::format("epoch {} {}\n", t, epochs[t].val_accuracy);
        const std::array<IntensiveSpace, 2> pair{epochs[t].normal, epochs[t].reduce};
        out += spaces_to_text(pair);
    }
    return out;
}

SpaceTrajectory SpaceTrajectory::from_text(std::string_view text) {
    SpaceTrajectory traj;
    std::istringstream in{std::string(text)};
    std::string line, block;
    double acc = 0;
    bool open = false;
    auto flush = [&] {
        if (!open) return;
        auto spaces = spaces_from_text(block);
        if (spaces.size() != 2) throw std::invalid_argument("trajectory text: each epoch needs both cell types");
        if (spaces[0].cell_type() != CellType::normal) std::swap(spaces[0], spaces[1]);
        traj.epochs.push_back(TrajectoryEntry{spaces[0], spaces[1], acc});
        block.clear();
    };
    while (std::getline(in, line)) {
        if (line.rfind("epoch ", 0) == 0) {
            flush();
            std::istringstream f(line.substr(6));
            std::size_t t = 0;
            if (!(f >> t >> acc) || t != traj.epochs.size()) {
                throw std::invalid_argument(fmt::format("trajectory text: bad epoch header '{}'", line));
            }
            open = true;
        } else if (!line.empty()) {
            if (!open) throw std::invalid_argument("trajectory text: slot line before epoch header");
            block += line;
            block += '\n';
        }
    }
    flush();
    return traj;
}

double superiority(std::span<const IntensiveSpace> spaces, std::span<const double> accuracies, std::size_t t,
                   std::size_t n) {
    if (spaces.size() != accuracies.size()) throw std::invalid_argument("superiority: spaces/accuracies length mismatch");
    if (t < n) throw std::invalid_argument(fmt::format("superiority: epoch {} is earlier than the lookback {}", t, n));
    if (t >= spaces.size()) throw std::out_of_range(fmt::format("superiority: epoch {} of {}", t, spaces.size()));
    double s = 1.0;
    for (std::size_t i = 0; i <= n; ++i) {
        const double acc = accuracies[t - i];
        if (!(acc >= 0.0 && acc <= 1.0)) throw std::invalid_argument("superiority: accuracy outside [0,1]");
        s *= stability(spaces[t - i], spaces[t]) * acc;
    }
    return s;
}

double superiority(const SpaceTrajectory& trajectory, CellType type, std::size_t t, std::size_t n) {
    std::vector<IntensiveSpace> spaces;
    std::vector<double> acc;
    for (const auto& e : trajectory.epochs) {
        spaces.push_back(e.space(type));
        acc.push_back(e.val_accuracy);
    }
    return superiority(spaces, acc, t, n);
}

Tensor relaxed_intensive_forward(std::span<const Tensor> node_values, const IntensiveSpace& space, std::size_t node,
                                 const Tensor& alpha_cell, const SlotEvaluator& evaluate) {
    if (alpha_cell.rank() != 1 || alpha_cell.numel() != space.size()) {
        throw std::invalid_argument(fmt::format("relaxed forward: alpha has shape {}, space has {} slots",
                                                shape_str(alpha_cell.shape()), space.size()));
    }
    if (node_values.size() < node) {
        throw std::invalid_argument(fmt::format("relaxed forward: node {} needs {} predecessors, got {}", node, node,
                                                node_values.size()));
    }
    const auto slots = space.node_slots(node);
    std::vector<std::size_t> idx(slots.size());
    std::iota(idx.begin(), idx.end(), space.slot_offset(node));
    const Tensor weights = softmax(gather(alpha_cell, idx), 0);
    std::vector<Tensor> terms;
    terms.reserve(slots.size());
    for (std::size_t r = 0; r < slots.size(); ++r) {
        terms.push_back(evaluate(slots[r], idx[r], node_values[slots[r].source]));
    }
    return weighted_sum(terms, weights);
}

namespace {

void set_trainable(std::span<Tensor> params, bool on) {
    for (auto& p : params) p.set_requires_grad(on);
}

double supernet_accuracy(const Supernet& net, const AlphaOriginal& alpha, const Split& split, std::size_t batch) {
    NoGradGuard guard;
    std::vector<std::size_t> order(split.size());
    std::iota(order.begin(), order.end(), 0);
    std::size_t correct = 0;
    for (const auto& b : make_batches(order, batch)) {
        const auto labels = split.batch_labels(b);
        const double acc = accuracy(net.forward(split.batch_images(b), alpha), labels);
        correct += static_cast<std::size_t>(std::lround(acc * static_cast<double>(b.size())));
    }
    return static_cast<double>(correct) / static_cast<double>(split.size());
}

}  // namespace

DerivationResult derive_intensive_space(const BackboneSpec& backbone, const Dataset& data, const DeriveOptions& options,
                                        std::uint64_t seed, const EpochCallback& on_epoch) {
    backbone.validate();
    if (options.epochs <= options.lookback) {
        throw std::invalid_argument(
            fmt::format("derive: epochs ({}) must exceed the lookback n ({})", options.epochs, options.lookback));
    }
    if (options.batch_size == 0) throw std::invalid_argument("derive: batch size must be positive");

    Rng init_rng(seed, "derive/init");
    Rng alpha_rng(seed, "derive/alpha");
    Rng shuffle_rng(seed, "derive/shuffle");
    Supernet net(backbone, init_rng);
    AlphaOriginal alpha = alpha_init(CellSpec{backbone.num_nodes, CellType::normal}, alpha_rng);

    std::vector<Tensor> weights = net.parameters();
    std::vector<Tensor> alphas = alpha.all();
    SgdState sgd = SgdState::init(weights, options.sgd);
    AdamState adam = AdamState::init(alphas, options.adam);

    const CellSpec normal_cell{backbone.num_nodes, CellType::normal};
    const CellSpec reduce_cell{backbone.num_nodes, CellType::reduce};
    DerivationResult result{
        select_topk_ops(alpha.normal, normal_cell, options.k), select_topk_ops(alpha.reduce, reduce_cell, options.k), {}, 0, {}};

    std::vector<std::size_t> train_order(data.train.size()), val_order(data.val.size());
    for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
        const Scalar lr = cosine_lr(epoch, options.epochs, options.weight_lr);
        std::iota(train_order.begin(), train_order.end(), 0);
        std::iota(val_order.begin(), val_order.end(), 0);
        shuffle_rng.shuffle(train_order);
        shuffle_rng.shuffle(val_order);
        const auto train_batches = make_batches(train_order, options.batch_size);
        const auto val_batches = make_batches(val_order, options.batch_size);

        double loss_sum = 0;
        for (std::size_t b = 0; b < train_batches.size(); ++b) {
            if (options.alpha_lr > 0) {
                const auto& vb = val_batches[b % val_batches.size()];
                set_trainable(weights, false);
                set_trainable(alphas, true);
                zero_grads(alphas);
                const auto labels = data.val.batch_labels(vb);
                const Tensor loss = cross_entropy(net.forward(data.val.batch_images(vb), alpha), labels);
                if (!std::isfinite(loss.item())) {
                    throw NumericalError(fmt::format("derive: non-finite validation loss at epoch {} batch {}", epoch, b));
                }
                backward(loss);
                adam_step(alphas, adam, options.alpha_lr);
            }

            const auto& tb = train_batches[b];
            set_trainable(alphas, false);
            set_trainable(weights, true);
            zero_grads(weights);
            const auto labels = data.train.batch_labels(tb);
            const Tensor loss = cross_entropy(net.forward(data.train.batch_images(tb), alpha), labels);
            if (!std::isfinite(loss.item())) {
                throw NumericalError(fmt::format("derive: non-finite training loss at epoch {} batch {}", epoch, b));
            }
            backward(loss);
            if (lr > 0) sgd_momentum_step(weights, sgd, lr);
            loss_sum += loss.item();
        }

        const double val_acc = supernet_accuracy(net, alpha, data.val, options.batch_size);
        result.trajectory.epochs.push_back(TrajectoryEntry{select_topk_ops(alpha.normal, normal_cell, options.k),
                                                           select_topk_ops(alpha.reduce, reduce_cell, options.k), val_acc});
        if (on_epoch) {
            on_epoch(EpochRecord{"derive", epoch, loss_sum / static_cast<double>(train_batches.size()), val_acc,
                                 options.alpha_lr > 0, true, lr});
        }
    }

    const auto& traj = result.trajectory;
    result.mean_superiority.assign(options.epochs, std::numeric_limits<double>::quiet_NaN());
    double best = -1.0;
    for (std::size_t t = options.lookback; t < options.epochs; ++t) {
        const double mean = 0.5 * (superiority(traj, CellType::normal, t, options.lookback) +
                                   superiority(traj, CellType::reduce, t, options.lookback));
        result.mean_superiority[t] = mean;
        if (mean >= best) {
            best = mean;
            result.best_epoch = t;
        }
    }
    result.normal = traj.epochs[result.best_epoch].normal;
    result.reduce = traj.epochs[result.best_epoch].reduce;
    return result;
}

}  // namespace hypernas
