#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "statiocl/num/tensor.hpp"

namespace statiocl::num {

/// Named, ordered collection of trainable tensors.
struct NamedTensor {
    std::string name;
    Tensor value;

    friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

using ParameterSet = std::vector<NamedTensor>;

std::size_t parameter_count(const ParameterSet& params);

struct AdamConfig {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.99;
    double eps = 1e-8;
    /// Decoupled: p <- p - lr * weight_decay * p, applied before the Adam update.
    double weight_decay = 3e-4;
};

struct AdamState {
    std::uint64_t step = 0;
    std::vector<Tensor> first_moment;
    std::vector<Tensor> second_moment;

    friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// Zero moments shaped like `params`.
AdamState adam_init(const ParameterSet& params);

/// One bias-corrected Adam update with decoupled weight decay.
/// `grads[i]` must have the shape of `params[i].value`.
void adam_step(ParameterSet& params, std::span<const Tensor> grads, AdamState& state,
               const AdamConfig& config);

}  // namespace statiocl::num
