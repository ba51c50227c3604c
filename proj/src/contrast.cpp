#include "statiocl/contrast.hpp"

#include <cmath>
#include <string>

#include "statiocl/error.hpp"
#include "statiocl/kvfile.hpp"
#include "statiocl/log.hpp"

namespace statiocl::contrast {

void validate(const ContrastConfig& c) {
    if (!(c.tau > 0.0)) throw ConfigError("contrast tau must be positive");
    if (!(c.lambda >= 0.0 && c.lambda <= 1.0)) throw ConfigError("contrast lambda must lie in [0, 1]");
    if (!(c.alpha > 1.0) || !(c.beta > 1.0)) {
        throw ConfigError("contrast alpha and beta must exceed 1 so the weight has a mode");
    }
    if (!(c.adf_threshold > 0.0 && c.adf_threshold < 1.0)) {
        throw ConfigError("contrast adf_threshold must lie in (0, 1)");
    }
}

double beta_function(double a, double b) { return std::exp(std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b)); }

double beta_pdf(double x, double a, double b) {
    if (x < 0.0 || x > 1.0) return 0.0;
    return std::pow(x, a - 1.0) * std::pow(1.0 - x, b - 1.0) / beta_function(a, b);
}

double beta_mode(double a, double b) {
    if (!(a > 1.0) || !(b > 1.0)) {
        throw ContractError("beta_mode: shapes must exceed 1, got alpha=" + format_double(a) +
                            " beta=" + format_double(b));
    }
    return (a - 1.0) / (a + b - 2.0);
}

double beta_weight(double x, double a, double b) {
    const double mode = beta_mode(a, b);
    if (x < 0.0 || x > 1.0 || std::isnan(x)) {
        warn("beta_weight: normalized distance " + format_double(x) + " clamped to [0, 1]");
        x = std::isnan(x) ? 0.0 : std::min(std::max(x, 0.0), 1.0);
    }
    if (x == 0.0 || x == 1.0) return 0.0;
    // Ratio of densities; B(a, b) cancels.
    const double log_ratio = (a - 1.0) * std::log(x / mode) + (b - 1.0) * std::log((1.0 - x) / (1.0 - mode));
    return std::exp(log_ratio);
}

PairStructure build_pair_structure(std::span<const int> states, std::span<const SegmentMeta> meta,
                                   const ContrastConfig& config) {
    const std::size_t n = states.size();
    if (n < 2) throw ContractError("build_pair_structure: batch needs at least 2 samples");
    if (meta.size() != n) throw DimensionError("build_pair_structure: metadata and states differ in length");
    if (config.horizon == 0) throw ContractError("build_pair_structure: horizon must be resolved to a positive value");
    PairStructure p;
    p.batch = n;
    p.nc_mask.assign(n * n, 0);
    p.tc_mask.assign(n * n, 0);
    p.weights.assign(n * n, 0.0);
    const double horizon = static_cast<double>(config.horizon);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k) {
            if (i == k) continue;
            const std::size_t at = i * n + k;
            if (states[i] != states[k]) {
                p.nc_mask[at] = 1;
                p.weights[at] = 1.0;
                continue;
            }
            p.tc_mask[at] = 1;
            if (meta[i].recording != meta[k].recording) {
                p.weights[at] = 1.0;
            } else {
                const std::size_t gap = meta[i].index > meta[k].index ? meta[i].index - meta[k].index
                                                                      : meta[k].index - meta[i].index;
                const double delta = std::min(static_cast<double>(gap) / horizon, 1.0);
                p.weights[at] = beta_weight(delta, config.alpha, config.beta);
            }
        }
    return p;
}

PairStructure random_pair_structure(std::size_t n) {
    if (n < 2) throw ContractError("random_pair_structure: batch needs at least 2 samples");
    PairStructure p;
    p.batch = n;
    p.nc_mask.assign(n * n, 1);
    p.tc_mask.assign(n * n, 0);
    p.weights.assign(n * n, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        p.nc_mask[i * n + i] = 0;
        p.weights[i * n + i] = 0.0;
    }
    return p;
}

namespace {

enum class Term { Nc, Tc };

num::Tensor denominator_weights(const PairStructure& p, Term term, const ContrastConfig& c) {
    const std::size_t n = p.batch;
    const bool with_positive = c.include_positive_in_denominator && !c.literal_equation_mode;
    num::Tensor w({n, n});
    for (std::size_t i = 0; i < n; ++i) {
        double row_total = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t at = i * n + j;
            if (i == j) {
                w[at] = with_positive ? 1.0 : 0.0;
            } else if (term == Term::Nc) {
                w[at] = p.nc_mask[at] ? 1.0 : 0.0;
            } else {
                w[at] = p.tc_mask[at] ? p.weights[at] : 0.0;
            }
            row_total += w[at];
        }
        if (!(row_total > 0.0)) {
            throw ContractError(std::string(term == Term::Nc ? "nc_loss" : "tc_loss") + ": anchor " +
                                std::to_string(i) +
                                " has no negatives and the positive term is excluded (empty denominator)");
        }
    }
    return w;
}

num::Var directional_mean(num::Var logits, const num::Tensor& weights) {
    return num::mean(num::sub(num::weighted_logsumexp_rows(logits, weights), num::diag(logits)));
}

num::Var term_loss(num::Var sim, const PairStructure& p, Term term, const ContrastConfig& c) {
    if (sim.shape().size() != 2 || sim.shape()[0] != p.batch || sim.shape()[1] != p.batch) {
        throw DimensionError("contrast loss: similarity " + num::shape_string(sim.shape()) +
                             " does not match batch " + std::to_string(p.batch));
    }
    const num::Tensor w = denominator_weights(p, term, c);
    const num::Var logits = num::scale(sim, 1.0 / c.tau);
    const num::Var forward = directional_mean(logits, w);
    const num::Var backward = directional_mean(num::transpose(logits), w);
    return num::scale(num::add(forward, backward), 0.5);
}

}  // namespace

num::Var nc_loss_from_similarity(num::Var sim, const PairStructure& p, const ContrastConfig& c) {
    return term_loss(sim, p, Term::Nc, c);
}

num::Var tc_loss_from_similarity(num::Var sim, const PairStructure& p, const ContrastConfig& c) {
    return term_loss(sim, p, Term::Tc, c);
}

LossBreakdown combined_loss_from_similarity(num::Var sim, const PairStructure& p, const ContrastConfig& c) {
    LossBreakdown out;
    out.nc = nc_loss_from_similarity(sim, p, c);
    out.tc = tc_loss_from_similarity(sim, p, c);
    out.total = num::add(num::scale(out.nc, c.lambda), num::scale(out.tc, 1.0 - c.lambda));
    return out;
}

num::Var nc_loss(num::Var z_a, num::Var z_b, const PairStructure& p, const ContrastConfig& c) {
    return nc_loss_from_similarity(num::cosine_sim_matrix(z_a, z_b), p, c);
}

num::Var tc_loss(num::Var z_a, num::Var z_b, const PairStructure& p, const ContrastConfig& c) {
    return tc_loss_from_similarity(num::cosine_sim_matrix(z_a, z_b), p, c);
}

LossBreakdown combined_loss(num::Var z_a, num::Var z_b, const PairStructure& p, const ContrastConfig& c) {
    return combined_loss_from_similarity(num::cosine_sim_matrix(z_a, z_b), p, c);
}

}  // namespace statiocl::contrast
