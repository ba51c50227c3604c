#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "statiocl/data/dataset.hpp"
#include "statiocl/rng.hpp"

namespace statiocl::data {

enum class ProcessKind { Ar1, RandomWalk, SineNoise, TrendNoise };

/// A named stochastic process, written as e.g. `ar1(0.5,1)`, `random_walk(1)`,
/// `sine_noise(0.05,0.3)` (frequency in cycles per step) or `trend_noise(0.02,1)`.
struct ProcessSpec {
    ProcessKind kind = ProcessKind::Ar1;
    std::vector<double> params;

    [[nodiscard]] std::string to_string() const;
    [[nodiscard]] bool stationary() const;
};

/// Throws ConfigError on unknown names, wrong arity or invalid parameters
/// (|phi| >= 1 for ar1, negative sigma).
ProcessSpec parse_process(const std::string& text);

/// Continuation state so consecutive segments of one run form a single path.
struct ProcessState {
    double level = 0.0;
    std::size_t step = 0;
    double phase = 0.0;
    bool started = false;
};

/// Draws `length` further steps of `spec`, advancing `state`.
/// random_walk starts at 0 and has Var(y_t) = t * sigma^2 for t = 1, 2, ...
std::vector<double> simulate_process(const ProcessSpec& spec, std::size_t length, ProcessState& state, Rng& rng);

struct SynthSpec {
    std::string name = "synthetic";
    std::vector<ProcessSpec> classes;
    std::size_t segments = 2000;
    std::size_t length = 179;
    std::size_t channels = 1;
    std::size_t segments_per_recording = 20;
    /// Mean of the geometric class run length, in segments (>= 1).
    double mean_run_length = 5.0;
    std::array<double, 3> split = {0.6, 0.2, 0.2};
    bool stratify = true;
    std::uint64_t seed = 0;
};

/// Builds a labelled corpus: class runs of geometric length (capped so every
/// class receives segments / C segments, remainder to the lowest classes) laid
/// across recordings of `segments_per_recording`. Splits are assigned and
/// train-split normalization statistics recorded; values stay raw.
Dataset gen_synthetic(const SynthSpec& spec);

}  // namespace statiocl::data
