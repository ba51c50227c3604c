#include "statiocl/num/optim.hpp"

#include <cmath>

#include "statiocl/error.hpp"

namespace statiocl::num {

std::size_t parameter_count(const ParameterSet& params) {
    std::size_t total = 0;
    for (const auto& p : params) total += p.value.size();
    return total;
}

AdamState adam_init(const ParameterSet& params) {
    AdamState state;
    for (const auto& p : params) {
        state.first_moment.emplace_back(p.value.shape());
        state.second_moment.emplace_back(p.value.shape());
    }
    return state;
}

void adam_step(ParameterSet& params, std::span<const Tensor> grads, AdamState& state,
               const AdamConfig& config) {
    if (grads.size() != params.size() || state.first_moment.size() != params.size() ||
        state.second_moment.size() != params.size()) {
        throw DimensionError("adam_step: " + std::to_string(params.size()) + " parameters, " +
                             std::to_string(grads.size()) + " gradients, " +
                             std::to_string(state.first_moment.size()) + " moment slots");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Shape& shape = params[i].value.shape();
        if (grads[i].shape() != shape || state.first_moment[i].shape() != shape ||
            state.second_moment[i].shape() != shape) {
            throw DimensionError("adam_step: shape mismatch for parameter '" + params[i].name + "'");
        }
    }

    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double bias1 = 1.0 - std::pow(config.beta1, t);
    const double bias2 = 1.0 - std::pow(config.beta2, t);
    const double decay = 1.0 - config.lr * config.weight_decay;

    for (std::size_t i = 0; i < params.size(); ++i) {
        auto p = params[i].value.data();
        auto m = state.first_moment[i].data();
        auto v = state.second_moment[i].data();
        const auto g = grads[i].data();
        for (std::size_t j = 0; j < p.size(); ++j) {
            p[j] *= decay;
            m[j] = config.beta1 * m[j] + (1.0 - config.beta1) * g[j];
            v[j] = config.beta2 * v[j] + (1.0 - config.beta2) * g[j] * g[j];
            const double m_hat = m[j] / bias1;
            const double v_hat = v[j] / bias2;
            p[j] -= config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
        }
    }
}

}  // namespace statiocl::num
