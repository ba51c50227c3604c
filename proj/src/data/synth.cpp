#include "statiocl/data/synth.hpp"

#include <cmath>
#include <numbers>

#include "statiocl/error.hpp"
#include "statiocl/kvfile.hpp"

namespace statiocl::data {

namespace {

struct KindInfo {
    ProcessKind kind;
    const char* name;
    std::size_t arity;
};

constexpr KindInfo kKinds[] = {
    {ProcessKind::Ar1, "ar1", 2},
    {ProcessKind::RandomWalk, "random_walk", 1},
    {ProcessKind::SineNoise, "sine_noise", 2},
    {ProcessKind::TrendNoise, "trend_noise", 2},
};

const KindInfo& info(ProcessKind kind) {
    for (const auto& k : kKinds)
        if (k.kind == kind) return k;
    throw ContractError("unknown process kind");
}

}  // namespace

std::string ProcessSpec::to_string() const {
    std::string out = std::string(info(kind).name) + "(";
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (i) out += ',';
        out += format_double(params[i]);
    }
    return out + ")";
}

bool ProcessSpec::stationary() const { return kind == ProcessKind::Ar1 || kind == ProcessKind::SineNoise; }

ProcessSpec parse_process(const std::string& raw) {
    const std::string text = trim(raw);
    const auto open = text.find('(');
    if (open == std::string::npos || text.back() != ')') {
        throw ConfigError("process '" + text + "': expected name(params)");
    }
    const std::string name = trim(std::string_view(text).substr(0, open));
    ProcessSpec spec;
    const KindInfo* found = nullptr;
    for (const auto& k : kKinds)
        if (name == k.name) found = &k;
    if (!found) {
        throw ConfigError("process '" + text + "': unknown generator '" + name + "'");
    }
    spec.kind = found->kind;
    for (const auto& item : split_list(std::string_view(text).substr(open + 1, text.size() - open - 2)))
        spec.params.push_back(parse_double(item, "process '" + text + "'"));
    if (spec.params.size() != found->arity) {
        throw ConfigError("process '" + text + "': " + name + " takes " + std::to_string(found->arity) +
                          " parameters");
    }
    const double sigma = spec.params.back();
    if (!(sigma >= 0.0)) {
        throw ConfigError("process '" + text + "': sigma must be non-negative");
    }
    if (spec.kind == ProcessKind::Ar1 && !(std::abs(spec.params[0]) < 1.0)) {
        throw ConfigError("process '" + text + "': ar1 needs |phi| < 1");
    }
    if (spec.kind == ProcessKind::SineNoise && !(spec.params[0] > 0.0)) {
        throw ConfigError("process '" + text + "': frequency must be positive");
    }
    return spec;
}

std::vector<double> simulate_process(const ProcessSpec& spec, std::size_t length, ProcessState& state, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> out(length);
    switch (spec.kind) {
        case ProcessKind::Ar1: {
            const double phi = spec.params[0], sigma = spec.params[1];
            if (!state.started) {
                state.level = normal(rng) * sigma / std::sqrt(1.0 - phi * phi);
                state.started = true;
            }
            for (double& v : out) {
                state.level = phi * state.level + sigma * normal(rng);
                v = state.level;
            }
            break;
        }
        case ProcessKind::RandomWalk: {
            const double sigma = spec.params[0];
            state.started = true;
            for (double& v : out) {
                state.level += sigma * normal(rng);
                v = state.level;
            }
            break;
        }
        case ProcessKind::SineNoise: {
            const double freq = spec.params[0], sigma = spec.params[1];
            if (!state.started) {
                state.phase = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);
                state.started = true;
            }
            for (double& v : out) {
                v = std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(state.step) + state.phase) +
                    sigma * normal(rng);
                ++state.step;
            }
            break;
        }
        case ProcessKind::TrendNoise: {
            const double slope = spec.params[0], sigma = spec.params[1];
            state.started = true;
            for (double& v : out) {
                v = slope * static_cast<double>(state.step) + sigma * normal(rng);
                ++state.step;
            }
            break;
        }
    }
    return out;
}

Dataset gen_synthetic(const SynthSpec& spec) {
    if (spec.classes.empty()) throw ConfigError("synthetic spec needs at least one class generator");
    if (spec.mean_run_length < 1.0) throw ConfigError("mean_run_length must be >= 1");
    if (spec.segments == 0 || spec.length == 0 || spec.channels == 0 || spec.segments_per_recording == 0) {
        throw ConfigError("synthetic spec needs positive segments, length, channels and segments_per_recording");
    }
    const std::size_t classes = spec.classes.size();
    Rng rng = make_rng(spec.seed, {stream::kSynth});

    // Class sequence: geometric runs capped by each class's remaining quota.
    std::vector<std::size_t> remaining(classes, spec.segments / classes);
    for (std::size_t c = 0; c < spec.segments % classes; ++c) ++remaining[c];
    std::geometric_distribution<std::size_t> extra(1.0 / spec.mean_run_length);
    std::vector<int> sequence;
    sequence.reserve(spec.segments);
    std::size_t current = std::uniform_int_distribution<std::size_t>(0, classes - 1)(rng);
    while (sequence.size() < spec.segments) {
        if (remaining[current] == 0) {
            for (std::size_t c = 0; c < classes; ++c)
                if (remaining[c] > 0) { current = c; break; }
        }
        const std::size_t run = std::min(1 + extra(rng), remaining[current]);
        for (std::size_t k = 0; k < run; ++k) sequence.push_back(static_cast<int>(current));
        remaining[current] -= run;
        std::vector<std::size_t> others;
        for (std::size_t c = 0; c < classes; ++c)
            if (c != current && remaining[c] > 0) others.push_back(c);
        if (!others.empty()) {
            current = others[std::uniform_int_distribution<std::size_t>(0, others.size() - 1)(rng)];
        }
    }

    Dataset ds;
    ds.name = spec.name;
    ds.length = spec.length;
    ds.channels = spec.channels;
    std::vector<ProcessState> states(spec.channels);
    for (std::size_t i = 0; i < spec.segments; ++i) {
        const std::size_t rec = i / spec.segments_per_recording;
        const std::size_t idx = i % spec.segments_per_recording;
        if (idx == 0) ds.recordings.push_back(Recording{rec, i, 0});
        ++ds.recordings.back().count;
        const bool fresh = idx == 0 || sequence[i] != sequence[i - 1];
        if (fresh) states.assign(spec.channels, ProcessState{});

        Segment s;
        s.id = i;
        s.recording = rec;
        s.index = idx;
        s.label = sequence[i];
        s.values.resize(spec.length * spec.channels);
        const ProcessSpec& process = spec.classes[static_cast<std::size_t>(sequence[i])];
        for (std::size_t v = 0; v < spec.channels; ++v) {
            const auto path = simulate_process(process, spec.length, states[v], rng);
            for (std::size_t t = 0; t < spec.length; ++t) s.values[t * spec.channels + v] = path[t];
        }
        ds.segments.push_back(std::move(s));
    }
    assign_splits(ds, spec.split, spec.seed, spec.stratify);
    ds.normalization = compute_normalization(ds);
    validate(ds);
    return ds;
}

}  // namespace statiocl::data
