#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "statiocl/num/ops.hpp"
#include "statiocl/num/optim.hpp"

namespace statiocl::encoder {

inline constexpr std::size_t kConvLayers = 3;

/// Three conv -> ReLU -> maxpool blocks, a global max over time and a linear
/// map to `output_dim`. No normalization layers and no projection head.
struct EncoderConfig {
    std::size_t in_channels = 1;
    std::array<std::size_t, kConvLayers> widths = {32, 64, 128};
    std::array<std::size_t, kConvLayers> kernels = {8, 8, 8};
    std::array<std::size_t, kConvLayers> pools = {2, 2, 2};
    std::size_t padding = 0;
    std::size_t output_dim = 64;
    /// Input length used for the admissibility check at init; 0 skips the check.
    std::size_t input_length = 0;
};

/// Throws ConfigError on invalid widths, kernels or output_dim, and
/// DimensionError naming the layer where `length` would underflow.
void validate(const EncoderConfig& config, std::size_t length);
/// Length-independent checks only.
void validate(const EncoderConfig& config);

/// Time-axis length after each conv and pool stage for an input of `length`.
std::vector<std::size_t> stage_lengths(const EncoderConfig& config, std::size_t length);

/// Closed-form parameter count: sum(C_out*C_in*K + C_out) + widths[2]*D + D.
std::size_t expected_parameter_count(const EncoderConfig& config);

/// Kaiming-uniform weights (bound sqrt(6 / fan_in)), zero biases. Parameter
/// order: conv1.weight, conv1.bias, ..., conv3.bias, fc.weight, fc.bias.
num::ParameterSet encoder_init(const EncoderConfig& config, std::uint64_t seed);

/// Differentiable forward pass. `params` are tape variables in encoder_init
/// order; `batch` is [B x V x T]. Returns [B x output_dim].
num::Var encode(const EncoderConfig& config, std::span<const num::Var> params, num::Var batch);

/// Inference convenience: forward pass on a private tape.
num::Tensor encode(const EncoderConfig& config, const num::ParameterSet& params, const num::Tensor& batch);

}  // namespace statiocl::encoder
