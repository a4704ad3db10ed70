// Copyright 2026 The hypernas Authors
// SPDX-License-Identifier: Apache-2.0

#include "hypernas/search.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include <boost/multiprecision/cpp_int.hpp>
#include <fmt/format.h>

#include "hypernas/ops.hpp"

namespace hypernas {

void SearchSchedule::validate() const {
    if (!(i_train <= cross_start && cross_start <= cross_end && cross_end <= i_total)) {
        throw std::invalid_argument(fmt::format(
            "schedule: need I_train <= I_cross_start <= I_cross_end <= I_total, got {} / {} / {} / {}", i_train,
            cross_start, cross_end, i_total));
    }
    if (i_train == 0) throw std::invalid_argument("schedule: I_train must be positive");
    if (i_total == i_train) throw std::invalid_argument("schedule: Stage 2 has no epochs");
    if (batch_size == 0) throw std::invalid_argument("schedule: batch size must be positive");
    if (sgd_lr < 0 || adam_lr < 0 || cross_lr_scale < 0) throw std::invalid_argument("schedule: negative learning rate");
}

GateState SearchSchedule::gate(std::size_t epoch) const {
    if (epoch < i_train) return {false, true};
    if (epoch >= cross_start && epoch < cross_end) return {true, true};
    return {true, false};
}

Scalar SearchSchedule::wg_lr(std::size_t epoch) const {
    if (epoch < i_train) return cosine_lr(epoch, i_train, sgd_lr);
    if (!gate(epoch).g_G) return 0;
    return cosine_lr(epoch - cross_start, cross_end - cross_start, sgd_lr * cross_lr_scale);
}

namespace {

void set_trainable(std::span<Tensor> params, bool on) {
    for (auto& p : params) p.set_requires_grad(on);
}

std::vector<std::vector<std::size_t>> shuffled_batches(std::size_t n, std::size_t batch, Rng& rng) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    return make_batches(order, batch);
}

template <typename Forward>
double split_accuracy(const Split& split, std::size_t batch, Forward&& forward) {
    NoGradGuard guard;
    std::vector<std::size_t> order(split.size());
    std::iota(order.begin(), order.end(), 0);
    std::size_t correct = 0;
    for (const auto& b : make_batches(order, batch)) {
        const auto labels = split.batch_labels(b);
        const double acc = accuracy(forward(split.batch_images(b)), labels);
        correct += static_cast<std::size_t>(std::lround(acc * static_cast<double>(b.size())));
    }
    return static_cast<double>(correct) / static_cast<double>(split.size());
}

void check_finite(const Tensor& loss, std::string_view stage, std::size_t epoch, std::size_t batch) {
    if (!std::isfinite(loss.item())) {
        throw NumericalError(fmt::format("{}: non-finite loss at epoch {} batch {}", stage, epoch, batch));
    }
}

}  // namespace

StageOneResult train_hypernetwork(HyperNetwork& net, const Dataset& data, const SearchSchedule& schedule,
                                  Rng& alpha_rng, Rng& shuffle_rng, const EpochCallback& on_epoch) {
    schedule.validate();
    std::vector<Tensor> weights = net.parameters();
    set_trainable(weights, true);
    StageOneResult result{{}, SgdState::init(weights, schedule.sgd)};
    const ArchParams uniform = arch_zeros(net);

    for (std::size_t epoch = 0; epoch < schedule.i_train; ++epoch) {
        const Scalar lr = schedule.wg_lr(epoch);
        const auto batches = shuffled_batches(data.train.size(), schedule.batch_size, shuffle_rng);
        double loss_sum = 0;
        for (std::size_t b = 0; b < batches.size(); ++b) {
            const ArchParams arch = sample_random_alpha(net, alpha_rng);
            zero_grads(weights);
            const auto labels = data.train.batch_labels(batches[b]);
            const Tensor loss = cross_entropy(net.forward(data.train.batch_images(batches[b]), arch), labels);
            check_finite(loss, "train_hyper", epoch, b);
            backward(loss);
            if (lr > 0) sgd_momentum_step(weights, result.sgd, lr);
            loss_sum += loss.item();
        }
        const double val_acc = split_accuracy(data.val, schedule.batch_size,
                                              [&](const Tensor& x) { return net.forward(x, uniform); });
        EpochRecord rec{"train_hyper", epoch, loss_sum / static_cast<double>(batches.size()), val_acc, false, true, lr};
        result.trace.push_back(rec);
        if (on_epoch) on_epoch(rec);
    }
    zero_grads(weights);
    return result;
}

SearchResult search_architecture(HyperNetwork& net, const Dataset& data, const SearchSchedule& schedule, SgdState sgd,
                                 Rng& init_rng, Rng& shuffle_rng, const SearchOptions& options,
                                 const EpochCallback& on_epoch) {
    schedule.validate();
    std::vector<Tensor> weights = net.parameters();
    if (sgd.velocity.size() != weights.size()) {
        throw std::invalid_argument("search: SGD state does not match the network parameters");
    }
    SearchResult result;
    ArchParams arch = arch_init(net, init_rng);
    std::vector<Tensor> alphas = arch.cells;
    result.adam = AdamState::init(alphas, schedule.adam);
    result.wg_checksum_start = checksum(weights);
    result.best_val_acc = -1;

    for (std::size_t epoch = schedule.i_train; epoch < schedule.i_total; ++epoch) {
        GateState gate = schedule.gate(epoch);
        if (options.force_alpha_gate_off) gate.g_alpha = false;
        const Scalar lr = schedule.wg_lr(epoch);
        set_trainable(weights, gate.g_G);
        set_trainable(alphas, gate.g_alpha);

        const auto batches = shuffled_batches(data.train.size(), schedule.batch_size, shuffle_rng);
        double loss_sum = 0;
        for (std::size_t b = 0; b < batches.size(); ++b) {
            zero_grads(weights);
            zero_grads(alphas);
            const auto labels = data.train.batch_labels(batches[b]);
            const Tensor loss = cross_entropy(net.forward(data.train.batch_images(batches[b]), arch), labels);
            check_finite(loss, "search", epoch, b);
            if (gate.g_alpha || gate.g_G) backward(loss);
            if (gate.g_alpha && schedule.adam_lr > 0) adam_step(alphas, result.adam, schedule.adam_lr);
            if (gate.g_G && lr > 0) sgd_momentum_step(weights, sgd, lr);
            loss_sum += loss.item();
        }
        const double val_acc =
            split_accuracy(data.val, schedule.batch_size, [&](const Tensor& x) { return net.forward(x, arch); });
        if (val_acc >= result.best_val_acc) {
            result.best_val_acc = val_acc;
            result.best_epoch = epoch;
            result.best = arch.clone(false);
        }
        result.wg_checksums.push_back(checksum(weights));
        EpochRecord rec{"search", epoch, loss_sum / static_cast<double>(batches.size()), val_acc, gate.g_alpha, gate.g_G,
                        lr};
        result.trace.push_back(rec);
        if (on_epoch) on_epoch(rec);
    }
    set_trainable(weights, true);
    zero_grads(weights);
    result.final_arch = arch.clone(false);
    result.sgd = std::move(sgd);
    return result;
}

std::string DiscreteArchitecture::to_text() const {
    std::vector<std::string> lines;
    for (const auto& o : ops) lines.push_back(fmt::format("{} {} {} {} {}", o.cell, o.node, o.source, op_name(o.op), o.prob));
    std::sort(lines.begin(), lines.end());
    std::string out;
    for (const auto& l : lines) {
        out += l;
        out += '\n';
    }
    return out;
}

DiscreteArchitecture DiscreteArchitecture::from_text(std::string_view text) {
    DiscreteArchitecture arch;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream f(line);
        DiscreteOp o;
        std::string op, prob, extra;
        if (!(f >> o.cell >> o.node >> o.source >> op >> prob) || (f >> extra)) {
            throw std::invalid_argument(fmt::format("architecture text: expected 5 fields in '{}'", line));
        }
        o.op = op_from_name(op);
        std::size_t used = 0;
        o.prob = std::stod(prob, &used);
        if (used != prob.size() || !(o.prob >= 0 && o.prob <= 1)) {
            throw std::invalid_argument(fmt::format("architecture text: bad probability in '{}'", line));
        }
        arch.ops.push_back(o);
    }
    std::sort(arch.ops.begin(), arch.ops.end(), [](const DiscreteOp& a, const DiscreteOp& b) {
        return std::tie(a.cell, a.node, a.source, a.op) < std::tie(b.cell, b.node, b.source, b.op);
    });
    // T is the per-node count, which must be uniform.
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> per_node;
    for (const auto& o : arch.ops) ++per_node[{o.cell, o.node}];
    for (const auto& [key, count] : per_node) {
        if (arch.t == 0) arch.t = count;
        if (count != arch.t) {
            throw std::invalid_argument(fmt::format("architecture text: cell {} node {} keeps {} ops, others keep {}",
                                                    key.first, key.second, count, arch.t));
        }
    }
    return arch;
}

DiscreteArchitecture discretize(const ArchParams& arch, const HyperNetwork& net, std::size_t t) {
    if (arch.num_cells() != net.layout().size()) {
        throw std::invalid_argument(fmt::format("discretize: {} alpha vectors for {} cells", arch.num_cells(), net.layout().size()));
    }
    DiscreteArchitecture out;
    out.t = t;
    NoGradGuard guard;
    for (std::size_t l = 0; l < arch.num_cells(); ++l) {
        const auto& sp = net.cell_space(l);
        if (t == 0 || t > sp.k()) throw std::invalid_argument(fmt::format("discretize: T = {} must be in [1, K = {}]", t, sp.k()));
        if (arch.cells[l].numel() != sp.size()) {
            throw std::invalid_argument(fmt::format("discretize: cell {} alpha has {} entries, space has {} slots", l,
                                                    arch.cells[l].numel(), sp.size()));
        }
        const Tensor probs = encode_cell_probabilities(arch.cells[l]);
        const auto p = probs.data();
        for (std::size_t j = 2; j + 1 < sp.num_nodes(); ++j) {
            std::vector<std::size_t> idx(sp.k());
            std::iota(idx.begin(), idx.end(), sp.slot_offset(j));
            // Slot order is (node, source, op), so the index is the tie-break.
            std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });
            for (std::size_t r = 0; r < t; ++r) {
                const Slot& s = sp.slots()[idx[r]];
                out.ops.push_back(DiscreteOp{l, s.node, s.source, s.op, p[idx[r]]});
            }
        }
    }
    std::sort(out.ops.begin(), out.ops.end(), [](const DiscreteOp& a, const DiscreteOp& b) {
        return std::tie(a.cell, a.node, a.source, a.op) < std::tie(b.cell, b.node, b.source, b.op);
    });
    return out;
}

std::vector<CellRouting> discrete_routing(const DiscreteArchitecture& arch, const HyperNetwork& net) {
    const std::size_t cells = net.layout().size();
    const std::size_t m_int = net.spec().num_nodes - 3;
    std::vector<CellRouting> routing(cells);
    std::vector<std::vector<Scalar>> gen(cells);
    std::vector<std::vector<std::vector<Scalar>>> mix(cells, std::vector<std::vector<Scalar>>(m_int));
    for (std::size_t l = 0; l < cells; ++l) {
        gen[l].assign(net.num_slots(l), 0.0);
        routing[l].active.resize(m_int);
    }
    for (const auto& o : arch.ops) {
        if (o.cell >= cells) throw std::invalid_argument(fmt::format("architecture: cell {} of {}", o.cell, cells));
        const auto& sp = net.cell_space(o.cell);
        const Slot slot{o.node, o.source, o.op};
        if (!sp.contains(slot)) {
            throw std::invalid_argument(fmt::format("architecture: cell {} node {} source {} {} is not in the {} space",
                                                    o.cell, o.node, o.source, op_name(o.op),
                                                    cell_type_name(sp.cell_type())));
        }
        const auto pos = static_cast<std::size_t>(
            std::lower_bound(sp.slots().begin(), sp.slots().end(), slot) - sp.slots().begin());
        gen[o.cell][pos] = o.prob;
        routing[o.cell].active[o.node - 2].push_back(pos);
        mix[o.cell][o.node - 2].push_back(o.prob);
    }
    for (std::size_t l = 0; l < cells; ++l) {
        const std::size_t slots = gen[l].size();
        routing[l].generation_probs = Tensor(Shape{slots}, std::move(gen[l]));
        for (std::size_t j = 0; j < m_int; ++j) {
            auto& w = mix[l][j];
            if (w.empty()) throw std::invalid_argument(fmt::format("architecture: cell {} node {} keeps no ops", l, j + 2));
            const Scalar total = std::accumulate(w.begin(), w.end(), Scalar{0});
            if (!(total > 0)) throw std::invalid_argument(fmt::format("architecture: cell {} node {} has zero mass", l, j + 2));
            for (auto& v : w) v /= total;
            routing[l].mixing.emplace_back(Shape{w.size()}, std::move(w));
        }
    }
    return routing;
}

double evaluate_architecture(const DiscreteArchitecture& arch, const HyperNetwork& net, const Split& split,
                             std::size_t batch_size) {
    const auto routing = discrete_routing(arch, net);
    return split_accuracy(split, batch_size, [&](const Tensor& x) { return net.forward(x, routing); });
}

double evaluate_relaxed(const ArchParams& arch, const HyperNetwork& net, const Split& split, std::size_t batch_size) {
    return split_accuracy(split, batch_size, [&](const Tensor& x) { return net.forward(x, arch); });
}

ComplexityCount complexity_count(std::size_t m, std::size_t k, std::size_t t, std::size_t l) {
    if (m < 4) throw std::invalid_argument(fmt::format("complexity: M = {} must be >= 4", m));
    if (l < 1) throw std::invalid_argument("complexity: L must be >= 1");
    if (k < 1 || t < 1 || t > k) throw std::invalid_argument(fmt::format("complexity: need 1 <= T <= K, got T = {}, K = {}", t, k));
    using boost::multiprecision::cpp_int;
    cpp_int choose = 1;
    for (std::size_t i = 0; i < t; ++i) {
        choose *= k - i;
        choose /= i + 1;
    }
    const std::size_t exponent = (m - 3) * l;
    cpp_int total = boost::multiprecision::pow(choose, static_cast<unsigned>(exponent));
    ComplexityCount out;
    out.exact = total.str();
    out.power = fmt::format("{}^{}", choose.str(), exponent);
    out.order = out.exact.size() - 1;
    return out;
}

}  // namespace hypernas
