#include "statiocl/num/tape.hpp"

#include <algorithm>

#include "statiocl/error.hpp"

namespace statiocl::num {

const Tensor& Var::value() const { return tape_->value(id_); }

bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::leaf(Tensor value) {
    Node node;
    node.value = std::move(value);
    node.requires_grad = true;
    node.leaf = true;
    nodes_.push_back(std::move(node));
    return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
    Node node;
    node.value = std::move(value);
    node.leaf = true;
    nodes_.push_back(std::move(node));
    return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::vector<NodeId> parents, BackwardFn backward) {
    Node node;
    node.value = std::move(value);
    node.requires_grad = std::any_of(parents.begin(), parents.end(),
                                     [this](NodeId p) { return nodes_.at(p).requires_grad; });
    if (node.requires_grad) {
        node.backward = std::move(backward);
    }
    node.parents = std::move(parents);
    nodes_.push_back(std::move(node));
    return Var(this, nodes_.size() - 1);
}

Tensor Tape::grad(Var v) const {
    const Node& node = nodes_.at(v.id());
    if (node.grad.empty()) {
        return Tensor(node.value.shape());
    }
    return Tensor(node.value.shape(), node.grad);
}

std::span<double> Tape::grad_buffer(NodeId id) {
    Node& node = nodes_.at(id);
    if (node.grad.empty()) {
        node.grad.assign(node.value.size(), 0.0);
    }
    return node.grad;
}

void Tape::backward(Var loss) {
    if (loss.value().size() != 1) {
        throw ContractError("backward() needs a scalar loss, got shape " +
                            shape_string(loss.value().shape()));
    }
    const NodeId root = loss.id();
    if (!nodes_.at(root).requires_grad) {
        return;
    }
    for (NodeId id = 0; id <= root; ++id) {
        if (!nodes_[id].leaf) {
            nodes_[id].grad.clear();
        }
    }
    grad_buffer(root)[0] += 1.0;
    for (NodeId id = root + 1; id-- > 0;) {
        Node& node = nodes_[id];
        if (node.leaf || !node.requires_grad || node.grad.empty()) {
            continue;
        }
        // The callback only touches parent buffers, so this span stays valid.
        node.backward(*this, std::span<const double>(node.grad));
    }
}

void Tape::zero_grad() {
    for (Node& node : nodes_) {
        node.grad.clear();
    }
}

}  // namespace statiocl::num
