#include "statiocl/encoder.hpp"

#include <cmath>
#include <string>

#include "statiocl/error.hpp"
#include "statiocl/rng.hpp"

namespace statiocl::encoder {

namespace {

void check_config(const EncoderConfig& c) {
    if (c.in_channels == 0) throw ConfigError("encoder in_channels must be positive");
    if (c.output_dim < 2) throw ConfigError("encoder output_dim must be at least 2");
    for (std::size_t l = 0; l < kConvLayers; ++l) {
        if (c.widths[l] == 0 || c.kernels[l] == 0 || c.pools[l] == 0) {
            throw ConfigError("encoder layer " + std::to_string(l + 1) + ": width, kernel and pool must be positive");
        }
    }
}

}  // namespace

std::vector<std::size_t> stage_lengths(const EncoderConfig& c, std::size_t length) {
    std::vector<std::size_t> out;
    std::size_t t = length;
    for (std::size_t l = 0; l < kConvLayers; ++l) {
        if (t + 2 * c.padding < c.kernels[l]) {
            throw DimensionError("encoder conv" + std::to_string(l + 1) + ": input length " + std::to_string(t) +
                                 " shorter than kernel " + std::to_string(c.kernels[l]));
        }
        t = t + 2 * c.padding - c.kernels[l] + 1;
        out.push_back(t);
        if (t < c.pools[l]) {
            throw DimensionError("encoder pool" + std::to_string(l + 1) + ": length " + std::to_string(t) +
                                 " shorter than pool window " + std::to_string(c.pools[l]));
        }
        t = (t - c.pools[l]) / c.pools[l] + 1;
        out.push_back(t);
    }
    return out;
}

void validate(const EncoderConfig& c, std::size_t length) {
    check_config(c);
    stage_lengths(c, length);
}

void validate(const EncoderConfig& c) { check_config(c); }

std::size_t expected_parameter_count(const EncoderConfig& c) {
    std::size_t total = 0;
    std::size_t cin = c.in_channels;
    for (std::size_t l = 0; l < kConvLayers; ++l) {
        total += c.widths[l] * cin * c.kernels[l] + c.widths[l];
        cin = c.widths[l];
    }
    return total + cin * c.output_dim + c.output_dim;
}

num::ParameterSet encoder_init(const EncoderConfig& c, std::uint64_t seed) {
    check_config(c);
    if (c.input_length > 0) stage_lengths(c, c.input_length);
    Rng rng = make_rng(seed, {stream::kInit});
    num::ParameterSet params;
    auto kaiming = [&rng](num::Shape shape, std::size_t fan_in) {
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        num::Tensor t(std::move(shape));
        for (double& v : t.data()) v = dist(rng);
        return t;
    };
    std::size_t cin = c.in_channels;
    for (std::size_t l = 0; l < kConvLayers; ++l) {
        const std::string prefix = "conv" + std::to_string(l + 1);
        params.push_back({prefix + ".weight", kaiming({c.widths[l], cin, c.kernels[l]}, cin * c.kernels[l])});
        params.push_back({prefix + ".bias", num::Tensor({c.widths[l]})});
        cin = c.widths[l];
    }
    params.push_back({"fc.weight", kaiming({cin, c.output_dim}, cin)});
    params.push_back({"fc.bias", num::Tensor({c.output_dim})});
    return params;
}

num::Var encode(const EncoderConfig& c, std::span<const num::Var> params, num::Var batch) {
    if (params.size() != 2 * kConvLayers + 2) {
        throw ContractError("encode: expected " + std::to_string(2 * kConvLayers + 2) + " parameters, got " +
                            std::to_string(params.size()));
    }
    if (batch.shape().size() != 3 || batch.shape()[1] != c.in_channels) {
        throw DimensionError("encode: expected input [B x " + std::to_string(c.in_channels) + " x T], got " +
                             num::shape_string(batch.shape()));
    }
    stage_lengths(c, batch.shape()[2]);
    num::Var h = batch;
    for (std::size_t l = 0; l < kConvLayers; ++l) {
        h = num::conv1d(h, params[2 * l], 1, c.padding);
        h = num::add_bias(h, params[2 * l + 1]);
        h = num::relu(h);
        h = num::maxpool1d(h, c.pools[l], c.pools[l]);
    }
    h = num::global_maxpool(h);
    h = num::matmul(h, params[2 * kConvLayers]);
    return num::add_bias(h, params[2 * kConvLayers + 1]);
}

num::Tensor encode(const EncoderConfig& c, const num::ParameterSet& params, const num::Tensor& batch) {
    num::Tape tape;
    std::vector<num::Var> vars;
    vars.reserve(params.size());
    for (const auto& p : params) vars.push_back(tape.constant(p.value));
    return encode(c, vars, tape.constant(batch)).value();
}

}  // namespace statiocl::encoder
