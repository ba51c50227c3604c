#pragma once

#include <cstddef>

#include "statiocl/num/tape.hpp"

/// Differentiable operations over tape variables.
///
/// Every op validates shapes and throws DimensionError on mismatch. Output
/// shape is a pure function of the input shapes and op parameters.
namespace statiocl::num {

/// [M x K] . [K x N] -> [M x N]
Var matmul(Var a, Var b);
/// [M x N] -> [N x M]
Var transpose(Var a);

Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Elementwise product of same-shape operands.
Var mul(Var a, Var b);
Var scale(Var a, double factor);

/// Adds a per-feature bias: x [B x N] with bias [N], or x [B x C x T] with bias [C].
Var add_bias(Var x, Var bias);

/// Gradient at exactly 0 is 0.
Var relu(Var x);
Var exp(Var x);
/// Requires strictly positive input; throws ContractError otherwise.
Var log(Var x);

/// Sum of all elements, rank-0 result.
Var sum(Var x);
/// Mean of all elements, rank-0 result.
Var mean(Var x);
/// [B x N] -> [B]
Var sum_rows(Var x);
/// Main diagonal of a square matrix, [B x B] -> [B].
Var diag(Var x);

/// 1-D cross-correlation (no kernel flip).
/// x [B x C_in x T], kernel [C_out x C_in x K] -> [B x C_out x T_out],
/// T_out = floor((T + 2*padding - K) / stride) + 1.
Var conv1d(Var x, Var kernel, std::size_t stride = 1, std::size_t padding = 0);

/// Max pooling along time for x [B x C x T]. Ties route the gradient to the
/// first attaining index.
Var maxpool1d(Var x, std::size_t window, std::size_t stride);

/// Max over the whole time axis, [B x C x T] -> [B x C]. First index wins ties.
Var global_maxpool(Var x);

/// Row-wise cosine similarity between a [B x D] and b [B' x D] -> [B x B'].
/// Norms are floored at kCosineEps.
inline constexpr double kCosineEps = 1e-12;
Var cosine_sim_matrix(Var a, Var b);

/// out_i = log(sum_j w_ij * exp(x_ij)) for x [B x N] and constant non-negative
/// weights [B x N]. Each row needs a positive weight sum (ContractError otherwise).
Var weighted_logsumexp_rows(Var x, const Tensor& weights);

}  // namespace statiocl::num
