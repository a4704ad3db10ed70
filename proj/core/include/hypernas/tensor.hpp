// Copyright 2026 The hypernas Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hypernas {

/// Element type of every tensor. Reductions and convolution inner products
/// accumulate in this type as well.
using Scalar = double;
using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Raised when a forward/backward pass or an optimizer step produces NaN/Inf.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class Tensor;

namespace detail {

struct Node;
using BackwardFn = std::function<void(Node&)>;

struct Node {
    Shape shape;
    std::vector<Scalar> data;
    std::vector<Scalar> grad;  // empty until an adjoint reaches this node
    bool requires_grad = false;
    std::uint64_t sequence = 0;  // execution order of the producing operation
    const char* op = "leaf";
    std::vector<std::shared_ptr<Node>> inputs;
    BackwardFn backward;  // reads this->grad, accumulates into inputs' grads

    std::vector<Scalar>& ensure_grad();
};

}  // namespace detail

/// Dense row-major n-dimensional array with an optional gradient slot.
///
/// A Tensor is a cheap handle: copies share storage and graph position. Ops
/// that consume a tensor with `requires_grad()` record themselves on the
/// result so that `backward()` can replay adjoints in reverse order.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, bool requires_grad = false);
    Tensor(Shape shape, std::vector<Scalar> values, bool requires_grad = false);

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
    static Tensor full(Shape shape, Scalar value);
    static Tensor ones(Shape shape) { return full(std::move(shape), 1.0); }
    static Tensor scalar(Scalar value) { return Tensor(Shape{}, std::vector<Scalar>{value}); }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t numel() const;

    std::span<const Scalar> data() const;
    std::span<Scalar> mutable_data();
    Scalar operator[](std::size_t flat_index) const { return data()[flat_index]; }
    Scalar item() const;

    bool requires_grad() const;
    void set_requires_grad(bool value);
    bool has_grad() const;
    std::span<const Scalar> grad() const;
    std::span<Scalar> mutable_grad();
    void zero_grad();
    void clear_grad();

    /// Same values, fresh leaf with no graph history.
    Tensor detach() const;
    const char* op_name() const;
    std::uint64_t sequence() const;

    /// Builds the output of a primitive op. The backward closure is attached
    /// only when gradient recording is enabled and some input requires grad.
    static Tensor make_result(Shape shape, std::vector<Scalar> values,
                              std::span<const Tensor> inputs, const char* op,
                              detail::BackwardFn backward);

    detail::Node& node() const;
    const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

private:
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
    std::shared_ptr<detail::Node> node_;
};

/// The executed operations reachable from a root, in the order adjoints are
/// replayed (strictly decreasing execution sequence).
class Graph {
public:
    static Graph collect(const Tensor& root);
    const std::vector<std::shared_ptr<detail::Node>>& replay_order() const { return order_; }
    std::size_t size() const { return order_.size(); }

private:
    std::vector<std::shared_ptr<detail::Node>> order_;
};

/// Populates `grad` of every requires-grad tensor reachable from `loss`.
/// Gradients accumulate; callers zero them between steps. The recorded graph
/// is released afterwards.
void backward(const Tensor& loss);

bool grad_enabled();

class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool all_finite(std::span<const Scalar> values);
inline bool all_finite(const Tensor& t) { return all_finite(t.data()); }

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

std::vector<Tensor> tensors_of(const NamedTensors& named);

/// FNV-1a over the raw bytes of every tensor's data, in order.
std::uint64_t checksum(std::span<const Tensor> tensors);

}  // namespace hypernas
