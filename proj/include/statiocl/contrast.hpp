#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "statiocl/num/ops.hpp"

/// Negative-pair construction and the contrastive objectives.
///
/// Pairs (i, j), i != j, whose anchors have different stationarity states are
/// hard negatives (non-stationary contrast). Same-state pairs are soft
/// negatives whose contribution is scaled by a Beta-shaped weight of their
/// normalized temporal distance (temporal contrast).
namespace statiocl::contrast {

struct ContrastConfig {
    double tau = 0.2;
    double lambda = 0.5;
    double alpha = 2.0;
    double beta = 8.0;
    /// Segments per unit of normalized time distance; 0 means "segments per recording".
    std::size_t horizon = 0;
    bool include_positive_in_denominator = true;
    /// Negatives-only denominator; an anchor without negatives raises ContractError.
    bool literal_equation_mode = false;
    double adf_threshold = 0.01;
};

void validate(const ContrastConfig& config);

/// Euler Beta function B(a, b) = Gamma(a) Gamma(b) / Gamma(a + b), via lgamma.
double beta_function(double a, double b);

/// Beta(a, b) density at x in [0, 1].
double beta_pdf(double x, double a, double b);

/// Mode (a - 1) / (a + b - 2) of Beta(a, b), a, b > 1.
double beta_mode(double a, double b);

/// beta_pdf(x) / beta_pdf(mode): 1 at the mode, 0 at both ends.
/// x outside [0, 1] is clamped with a warning; a, b must exceed 1.
double beta_weight(double x, double a, double b);

struct SegmentMeta {
    std::size_t recording = 0;
    std::size_t index = 0;
};

/// Row-major B x B masks and weights.
struct PairStructure {
    std::size_t batch = 0;
    std::vector<std::uint8_t> nc_mask;  ///< i != j, state_i != state_j
    std::vector<std::uint8_t> tc_mask;  ///< i != j, state_i == state_j
    std::vector<double> weights;        ///< tc support: temporal weight; nc support: 1; elsewhere 0

    [[nodiscard]] bool nc(std::size_t i, std::size_t j) const { return nc_mask[i * batch + j] != 0; }
    [[nodiscard]] bool tc(std::size_t i, std::size_t j) const { return tc_mask[i * batch + j] != 0; }
    [[nodiscard]] double weight(std::size_t i, std::size_t j) const { return weights[i * batch + j]; }
};

/// Same-recording tc pairs get beta_weight(min(|idx_i - idx_k| / horizon, 1));
/// cross-recording tc pairs and all nc pairs get weight 1. Requires B >= 2.
/// `horizon` must be resolved (> 0) by the caller.
PairStructure build_pair_structure(std::span<const int> states, std::span<const SegmentMeta> meta,
                                   const ContrastConfig& config);

/// All off-diagonal pairs as unweighted negatives (random-negative baseline).
PairStructure random_pair_structure(std::size_t batch);

struct LossBreakdown {
    num::Var total;
    num::Var nc;
    num::Var tc;
};

/// Losses from a precomputed B x B similarity matrix (rows: view a, columns: view b).
/// Each is the mean over anchors, averaged over the a->b and b->a directions.
num::Var nc_loss_from_similarity(num::Var sim, const PairStructure& pairs, const ContrastConfig& config);
num::Var tc_loss_from_similarity(num::Var sim, const PairStructure& pairs, const ContrastConfig& config);
LossBreakdown combined_loss_from_similarity(num::Var sim, const PairStructure& pairs, const ContrastConfig& config);

/// Same, with sim = cosine_sim_matrix(z_a, z_b).
num::Var nc_loss(num::Var z_a, num::Var z_b, const PairStructure& pairs, const ContrastConfig& config);
num::Var tc_loss(num::Var z_a, num::Var z_b, const PairStructure& pairs, const ContrastConfig& config);
/// L = lambda * L_NC + (1 - lambda) * L_TC.
LossBreakdown combined_loss(num::Var z_a, num::Var z_b, const PairStructure& pairs, const ContrastConfig& config);

}  // namespace statiocl::contrast
