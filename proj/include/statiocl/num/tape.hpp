#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "statiocl/num/tensor.hpp"

namespace statiocl::num {

class Tape;

using NodeId = std::size_t;

/// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
public:
    Var() = default;
    Var(Tape* tape, NodeId id) : tape_(tape), id_(id) {}

    [[nodiscard]] Tape& tape() const { return *tape_; }
    [[nodiscard]] NodeId id() const noexcept { return id_; }
    [[nodiscard]] const Tensor& value() const;
    [[nodiscard]] const Shape& shape() const { return value().shape(); }
    [[nodiscard]] bool requires_grad() const;

private:
    Tape* tape_ = nullptr;
    NodeId id_ = 0;
};

/// Propagates the gradient of a node's output into its parents' gradient buffers.
using BackwardFn = std::function<void(Tape& tape, std::span<const double> out_grad)>;

/// Reverse-mode autodiff record.
///
/// Nodes are appended in evaluation order, so parents always precede children
/// and a reverse sweep is a valid topological traversal. Leaves keep their
/// gradient across backward() calls (accumulation); interior gradients are
/// rebuilt on every call.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Trainable input. Its gradient accumulates over backward() calls.
    Var leaf(Tensor value);
    /// Input that never receives a gradient.
    Var constant(Tensor value);

    /// Records the result of an op. `backward` runs only if some parent requires grad.
    Var record(Tensor value, std::vector<NodeId> parents, BackwardFn backward);

    [[nodiscard]] const Tensor& value(NodeId id) const { return nodes_.at(id).value; }
    [[nodiscard]] bool requires_grad(NodeId id) const { return nodes_.at(id).requires_grad; }
    [[nodiscard]] bool is_leaf(NodeId id) const { return nodes_.at(id).leaf; }

    /// Gradient of a node; all zeros before any backward pass reached it.
    [[nodiscard]] Tensor grad(Var v) const;
    /// Mutable gradient storage for `id`, allocated lazily. Used by op backward functions.
    std::span<double> grad_buffer(NodeId id);

    /// Accumulates d(loss)/d(leaf) into every leaf reachable from `loss`.
    /// Throws ContractError if `loss` is not a single-element tensor.
    void backward(Var loss);

    /// Clears every gradient buffer, leaves included.
    void zero_grad();

    [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        std::vector<double> grad;
        std::vector<NodeId> parents;
        BackwardFn backward;
        bool requires_grad = false;
        bool leaf = false;
    };

    std::vector<Node> nodes_;
};

}  // namespace statiocl::num
