#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "gradcheck.hpp"
#include "statiocl/encoder.hpp"
#include "statiocl/error.hpp"
#include "statiocl/rng.hpp"

using namespace statiocl;
using namespace statiocl::encoder;
using statiocl::testing::check_gradient;

namespace {

EncoderConfig small_config() {
    EncoderConfig c;
    c.in_channels = 2;
    c.widths = {4, 6, 8};
    c.kernels = {3, 3, 3};
    c.output_dim = 5;
    return c;
}

num::Tensor random_batch(std::size_t b, std::size_t v, std::size_t t, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> d(0.0, 1.0);
    num::Tensor x({b, v, t});
    for (double& e : x.data()) e = d(rng);
    return x;
}

}  // namespace

TEST_CASE("parameter count matches the closed form") {
    EncoderConfig c;
    c.in_channels = 3;
    const auto params = encoder_init(c, 1);
    const std::size_t closed = (32 * 3 * 8 + 32) + (64 * 32 * 8 + 64) + (128 * 64 * 8 + 128) + 128 * 64 + 64;
    CHECK(num::parameter_count(params) == closed);
    CHECK(expected_parameter_count(c) == closed);
    REQUIRE(params.size() == 8);
    CHECK(params[0].name == "conv1.weight");
    CHECK(params[7].name == "fc.bias");
}

TEST_CASE("initialization is deterministic and shapes are config-determined") {
    const EncoderConfig c = small_config();
    CHECK(encoder_init(c, 7) == encoder_init(c, 7));
    const auto a = encoder_init(c, 7);
    const auto b = encoder_init(c, 8);
    CHECK_FALSE(a == b);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].value.shape() == b[i].value.shape());
    for (const auto& p : a) {
        if (p.name.ends_with(".bias")) {
            for (double v : p.value.data()) CHECK(v == 0.0);
        }
    }
    // Kaiming-uniform bound sqrt(6 / fan_in).
    const double bound = std::sqrt(6.0 / (2.0 * 3.0));
    for (double v : a[0].value.data()) CHECK(std::abs(v) <= bound);
}

TEST_CASE("output shape is B x output_dim for admissible lengths") {
    EncoderConfig c;
    const auto params = encoder_init(c, 3);
    for (std::size_t t : {64u, 100u, 179u}) {
        const auto z = encode(c, params, random_batch(3, 1, t, t));
        CHECK(z.shape() == num::Shape{3, 64});
        for (double v : z.data()) CHECK(std::isfinite(v));
    }
}

TEST_CASE("zero input gives identical rows equal to the bias path") {
    const EncoderConfig c = small_config();
    auto params = encoder_init(c, 4);
    Rng rng(9);
    std::uniform_real_distribution<double> d(-0.5, 0.5);
    for (auto& p : params)
        if (p.name.ends_with(".bias"))
            for (double& v : p.value.data()) v = d(rng);
    const auto z = encode(c, params, num::Tensor({4, 2, 40}));
    for (std::size_t r = 1; r < 4; ++r)
        for (std::size_t k = 0; k < c.output_dim; ++k) CHECK(z.at(r, k) == z.at(0, k));

    // Bias path: every stage sees a constant signal.
    std::vector<double> h(c.widths[0]);
    for (std::size_t o = 0; o < h.size(); ++o) h[o] = std::max(0.0, params[1].value[o]);
    for (std::size_t l = 1; l < kConvLayers; ++l) {
        const auto& w = params[2 * l].value;
        const auto& bias = params[2 * l + 1].value;
        std::vector<double> next(c.widths[l]);
        for (std::size_t o = 0; o < next.size(); ++o) {
            double s = bias[o];
            for (std::size_t i = 0; i < h.size(); ++i)
                for (std::size_t k = 0; k < c.kernels[l]; ++k) s += w[(o * h.size() + i) * c.kernels[l] + k] * h[i];
            next[o] = std::max(0.0, s);
        }
        h = next;
    }
    for (std::size_t k = 0; k < c.output_dim; ++k) {
        double s = params[7].value[k];
        for (std::size_t i = 0; i < h.size(); ++i) s += params[6].value.at(i, k) * h[i];
        CHECK(z.at(0, k) == doctest::Approx(s).epsilon(1e-12));
    }
}

TEST_CASE("permuting batch rows permutes outputs") {
    const EncoderConfig c = small_config();
    const auto params = encoder_init(c, 5);
    const num::Tensor x = random_batch(5, 2, 40, 11);
    const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
    num::Tensor xp(x.shape());
    const std::size_t row = 2 * 40;
    for (std::size_t r = 0; r < 5; ++r)
        std::copy_n(x.data().begin() + perm[r] * row, row, xp.data().begin() + r * row);
    const auto z = encode(c, params, x);
    const auto zp = encode(c, params, xp);
    for (std::size_t r = 0; r < 5; ++r)
        for (std::size_t k = 0; k < c.output_dim; ++k) CHECK(zp.at(r, k) == z.at(perm[r], k));
}

TEST_CASE("encoder gradient matches finite differences") {
    const EncoderConfig c = small_config();
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const auto params = encoder_init(c, seed);
        std::vector<num::Tensor> inputs;
        for (const auto& p : params) inputs.push_back(p.value);
        inputs.push_back(random_batch(2, 2, 32, 100 + seed));
        const num::Tensor proj = random_batch(1, 2, c.output_dim, 200 + seed);
        const auto fn = [&](num::Tape& tape, std::span<const num::Var> in) {
            const num::Var z = encode(c, in.first(params.size()), in.back());
            return num::sum(num::mul(z, tape.constant(num::Tensor({2, c.output_dim}, proj.values()))));
        };
        const auto r = check_gradient(fn, inputs);
        CHECK(r.checked > 0);
        CHECK(r.max_rel_error <= 1e-3);
    }
}

TEST_CASE("length underflow names the offending layer") {
    EncoderConfig c;
    CHECK_NOTHROW(validate(c, 64));
    try {
        validate(c, 20);
        FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
        CHECK(std::string(e.what()).find("conv2") != std::string::npos);
    }
    try {
        validate(c, 5);
        FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
        CHECK(std::string(e.what()).find("conv1") != std::string::npos);
    }
    c.input_length = 20;
    CHECK_THROWS_AS(encoder_init(c, 0), DimensionError);
    const auto params = encoder_init(EncoderConfig{}, 0);
    CHECK_THROWS_AS(encode(EncoderConfig{}, params, num::Tensor({1, 1, 20})), DimensionError);
    CHECK_THROWS_AS(encode(EncoderConfig{}, params, num::Tensor({1, 2, 100})), DimensionError);
}

TEST_CASE("invalid configs are rejected") {
    EncoderConfig c;
    c.output_dim = 1;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = EncoderConfig{};
    c.widths[1] = 0;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = EncoderConfig{};
    c.in_channels = 0;
    CHECK_THROWS_AS(encoder_init(c, 0), ConfigError);
}
