#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "statiocl/num/ops.hpp"

namespace statiocl::testing {

/// Builds a scalar from leaf variables recorded on `tape`.
using ScalarFn = std::function<num::Var(num::Tape& tape, std::span<const num::Var> inputs)>;

struct GradCheck {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
};

/// Compares reverse-mode gradients of `fn` at `inputs` against central
/// differences with step h = 1e-5 * max(1, |x|). Relative error is
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-3).
inline GradCheck check_gradient(const ScalarFn& fn, const std::vector<num::Tensor>& inputs) {
    std::vector<num::Tensor> analytic;
    {
        num::Tape tape;
        std::vector<num::Var> vars;
        for (const auto& t : inputs) vars.push_back(tape.leaf(t));
        tape.backward(fn(tape, vars));
        for (const auto& v : vars) analytic.push_back(tape.grad(v));
    }
    auto evaluate = [&](const std::vector<num::Tensor>& at) {
        num::Tape tape;
        std::vector<num::Var> vars;
        for (const auto& t : at) vars.push_back(tape.constant(t));
        return fn(tape, vars).value().item();
    };
    GradCheck out;
    std::vector<num::Tensor> probe = inputs;
    for (std::size_t i = 0; i < inputs.size(); ++i)
        for (std::size_t j = 0; j < inputs[i].size(); ++j) {
            const double x = inputs[i][j];
            const double h = 1e-5 * std::max(1.0, std::abs(x));
            probe[i][j] = x + h;
            const double up = evaluate(probe);
            probe[i][j] = x - h;
            const double down = evaluate(probe);
            probe[i][j] = x;
            const double numeric = (up - down) / (2.0 * h);
            const double a = analytic[i][j];
            const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-3});
            out.max_rel_error = std::max(out.max_rel_error, rel);
            ++out.checked;
        }
    return out;
}

}  // namespace statiocl::testing
