#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "statiocl/augment.hpp"
#include "statiocl/contrast.hpp"
#include "statiocl/data/synth.hpp"
#include "statiocl/encoder.hpp"
#include "statiocl/evaluate.hpp"
#include "statiocl/stationarity/adf.hpp"
#include "statiocl/train.hpp"

namespace statiocl {

struct DataConfig {
    /// Dataset manifest for subcommands that consume a corpus; empty when unset.
    std::string manifest;
    bool normalize = true;
    /// Generator settings for gen-synth (seed comes from RunConfig::seed).
    data::SynthSpec synth;
};

struct EvalConfig {
    evaluate::ProbeConfig probe;
    std::vector<double> label_fractions = {1.0, 0.75, 0.5, 0.25, 0.1};
    std::vector<double> grid_betas = {8.0, 16.0, 24.0, 32.0};
    /// ADF thresholds swept by `grid`; empty keeps [contrast] adf_threshold.
    std::vector<double> grid_thresholds;
};

/// Every tunable of a run. Sections: [data] [augment] [encoder] [contrast] [train] [eval],
/// plus a top-level `seed`. Unknown sections and keys are rejected.
struct RunConfig {
    std::uint64_t seed = 0;
    DataConfig data;
    augment::AugmentConfig augment;
    encoder::EncoderConfig encoder;
    contrast::ContrastConfig contrast;
    stationarity::LagPolicy adf_lag;
    train::TrainConfig train;
    EvalConfig eval;
};

RunConfig default_run_config();

/// Parses config text over the defaults. Throws ConfigError naming the source,
/// line and offending key.
RunConfig parse_run_config(const std::string& text, const std::string& source = "<config>");
RunConfig load_run_config(const std::filesystem::path& path);

/// Range checks across all sections; throws ConfigError.
void validate(const RunConfig& config);

/// Canonical text with every key spelled out; parse_run_config(to_string(c)) == c.
std::string to_string(const RunConfig& config);

/// FNV-1a of `text`, as 16 hex digits.
std::string hash_hex(const std::string& text);

}  // namespace statiocl
