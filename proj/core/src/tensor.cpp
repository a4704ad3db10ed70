// Copyright 2026 The hypernas Authors
// SPDX-License-Identifier: Apache-2.0

#include "hypernas/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <unordered_set>

#include <fmt/format.h>
#include <fmt/ranges.h>

namespace hypernas {

namespace {

std::atomic<std::uint64_t> g_sequence{0};
thread_local bool t_grad_enabled = true;

std::uint64_t next_sequence() { return g_sequence.fetch_add(1, std::memory_order_relaxed) + 1; }

}  // namespace

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) { return fmt::format("[{}]", fmt::join(shape, ",")); }

std::vector<Scalar>& detail::Node::ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
    return grad;
}

Tensor::Tensor(Shape shape, bool requires_grad) : node_(std::make_shared<detail::Node>()) {
    node_->data.assign(shape_numel(shape), 0.0);
    node_->shape = std::move(shape);
    node_->requires_grad = requires_grad;
    node_->sequence = next_sequence();
}

Tensor::Tensor(Shape shape, std::vector<Scalar> values, bool requires_grad)
    : node_(std::make_shared<detail::Node>()) {
    if (values.size() != shape_numel(shape)) {
        throw std::invalid_argument(fmt::format("tensor: shape {} needs {} values, got {}",
                                                shape_str(shape), shape_numel(shape), values.size()));
    }
    node_->shape = std::move(shape);
    node_->data = std::move(values);
    node_->requires_grad = requires_grad;
    node_->sequence = next_sequence();
}

Tensor Tensor::full(Shape shape, Scalar value) {
    const std::size_t n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<Scalar>(n, value));
}

detail::Node& Tensor::node() const {
    if (!node_) throw std::logic_error("tensor: use of undefined tensor");
    return *node_;
}

const Shape& Tensor::shape() const { return node().shape; }

std::size_t Tensor::dim(std::size_t axis) const {
    const auto& s = shape();
    if (axis >= s.size()) {
        throw std::out_of_range(fmt::format("tensor: axis {} out of range for shape {}", axis, shape_str(s)));
    }
    return s[axis];
}

std::size_t Tensor::numel() const { return node().data.size(); }

std::span<const Scalar> Tensor::data() const { return node().data; }
std::span<Scalar> Tensor::mutable_data() { return node().data; }

Scalar Tensor::item() const {
    if (numel() != 1) {
        throw std::invalid_argument(fmt::format("tensor: item() on shape {}", shape_str(shape())));
    }
    return node().data[0];
}

bool Tensor::requires_grad() const { return node().requires_grad; }
void Tensor::set_requires_grad(bool value) { node().requires_grad = value; }
bool Tensor::has_grad() const { return !node().grad.empty(); }
std::span<const Scalar> Tensor::grad() const { return node().grad; }
std::span<Scalar> Tensor::mutable_grad() { return node().ensure_grad(); }

void Tensor::zero_grad() {
    auto& g = node().grad;
    std::fill(g.begin(), g.end(), 0.0);
}

void Tensor::clear_grad() {
    node().grad.clear();
    node().grad.shrink_to_fit();
}

Tensor Tensor::detach() const { return Tensor(shape(), std::vector<Scalar>(data().begin(), data().end())); }

const char* Tensor::op_name() const { return node().op; }
std::uint64_t Tensor::sequence() const { return node().sequence; }

Tensor Tensor::make_result(Shape shape, std::vector<Scalar> values, std::span<const Tensor> inputs,
                           const char* op, detail::BackwardFn backward) {
    if (values.size() != shape_numel(shape)) {
        throw std::logic_error(fmt::format("{}: result shape {} needs {} values, got {}", op, shape_str(shape),
                                           shape_numel(shape), values.size()));
    }
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->data = std::move(values);
    node->op = op;
    node->sequence = next_sequence();
    if (t_grad_enabled) {
        const bool any = std::any_of(inputs.begin(), inputs.end(),
                                     [](const Tensor& t) { return t.defined() && t.requires_grad(); });
        if (any) {
            node->requires_grad = true;
            node->inputs.reserve(inputs.size());
            for (const auto& t : inputs) node->inputs.push_back(t.node_);
            node->backward = std::move(backward);
        }
    }
    return Tensor(std::move(node));
}

Graph Graph::collect(const Tensor& root) {
    Graph graph;
    std::unordered_set<const detail::Node*> seen;
    std::vector<std::shared_ptr<detail::Node>> stack{root.node_ptr()};
    while (!stack.empty()) {
        auto n = std::move(stack.back());
        stack.pop_back();
        if (!n || !n->requires_grad || !seen.insert(n.get()).second) continue;
        for (const auto& in : n->inputs) stack.push_back(in);
        if (n->backward) graph.order_.push_back(std::move(n));
    }
    std::sort(graph.order_.begin(), graph.order_.end(),
              [](const auto& a, const auto& b) { return a->sequence > b->sequence; });
    return graph;
}

void backward(const Tensor& loss) {
    if (loss.numel() != 1) {
        throw std::invalid_argument(
            fmt::format("backward: loss must be a scalar, got shape {}", shape_str(loss.shape())));
    }
    if (!loss.requires_grad()) return;
    const Graph graph = Graph::collect(loss);
    loss.node().ensure_grad()[0] += 1.0;
    for (const auto& n : graph.replay_order()) {
        if (n->grad.empty()) continue;
        n->backward(*n);
        // Single-use graph: drop closures and edges so intermediates can be freed.
        n->backward = nullptr;
        n->inputs.clear();
    }
}

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

bool all_finite(std::span<const Scalar> values) {
    return std::all_of(values.begin(), values.end(), [](Scalar v) { return std::isfinite(v); });
}

std::vector<Tensor> tensors_of(const NamedTensors& named) {
    std::vector<Tensor> out;
    out.reserve(named.size());
    for (const auto& [name, t] : named) out.push_back(t);
    return out;
}

std::uint64_t checksum(std::span<const Tensor> tensors) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& t : tensors) {
        const auto d = t.data();
        const auto* bytes = reinterpret_cast<const unsigned char*>(d.data());
        for (std::size_t i = 0; i < d.size_bytes(); ++i) {
            h ^= bytes[i];
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

}  // namespace hypernas
