#include "statiocl/augment.hpp"

#include <algorithm>
#include <numeric>

#include "statiocl/error.hpp"

namespace statiocl::augment {

void validate(const AugmentConfig& c) {
    if (!(c.jitter_sigma_weak >= 0.0) || !(c.jitter_sigma_strong >= 0.0) || !(c.scale_sigma >= 0.0)) {
        throw ConfigError("augment sigmas must be non-negative");
    }
    if (c.max_segments < 1) {
        throw ConfigError("augment max_segments must be at least 1");
    }
}

std::vector<double> jitter(std::span<const double> x, std::size_t channels, double sigma,
                           std::span<const double> channel_std, Rng& rng) {
    if (channel_std.size() != channels || x.size() % channels != 0) {
        throw DimensionError("jitter: channel statistics do not match input");
    }
    std::vector<double> out(x.begin(), x.end());
    if (sigma == 0.0) return out;
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += sigma * channel_std[i % channels] * normal(rng);
    return out;
}

std::vector<double> scale(std::span<const double> x, std::size_t channels, double sigma, Rng& rng) {
    if (x.size() % channels != 0) {
        throw DimensionError("scale: input size is not a multiple of the channel count");
    }
    std::vector<double> out(x.begin(), x.end());
    if (sigma == 0.0) return out;
    std::normal_distribution<double> normal(1.0, sigma);
    std::vector<double> factor(channels);
    for (double& f : factor) f = normal(rng);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= factor[i % channels];
    return out;
}

std::vector<double> permute(std::span<const double> x, std::size_t channels, std::size_t max_segments, Rng& rng,
                            std::vector<std::size_t>* order) {
    if (max_segments < 1) {
        throw ConfigError("permute: max_segments must be at least 1");
    }
    if (x.size() % channels != 0) {
        throw DimensionError("permute: input size is not a multiple of the channel count");
    }
    const std::size_t len = x.size() / channels;
    std::size_t pieces = 1;
    if (max_segments > 1 && len > 1) {
        pieces = std::uniform_int_distribution<std::size_t>(2, max_segments)(rng);
        pieces = std::min(pieces, len);
    }
    // Distinct cut points drawn from 1..len-1.
    std::vector<std::size_t> candidates(len - 1);
    std::iota(candidates.begin(), candidates.end(), std::size_t{1});
    std::vector<std::size_t> cuts;
    if (pieces > 1) {
        std::sample(candidates.begin(), candidates.end(), std::back_inserter(cuts), pieces - 1, rng);
    }
    std::vector<std::size_t> bounds{0};
    bounds.insert(bounds.end(), cuts.begin(), cuts.end());
    bounds.push_back(len);

    std::vector<std::size_t> piece_order(pieces);
    std::iota(piece_order.begin(), piece_order.end(), std::size_t{0});
    std::shuffle(piece_order.begin(), piece_order.end(), rng);

    std::vector<std::size_t> source;
    source.reserve(len);
    for (std::size_t p : piece_order)
        for (std::size_t t = bounds[p]; t < bounds[p + 1]; ++t) source.push_back(t);

    std::vector<double> out(x.size());
    for (std::size_t t = 0; t < len; ++t)
        std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(source[t] * channels), channels,
                    out.begin() + static_cast<std::ptrdiff_t>(t * channels));
    if (order) *order = std::move(source);
    return out;
}

void to_channel_major(std::span<const double> x, std::size_t length, std::size_t channels, std::span<double> out) {
    for (std::size_t t = 0; t < length; ++t)
        for (std::size_t v = 0; v < channels; ++v) out[v * length + t] = x[t * channels + v];
}

AugmentedBatch make_views(const data::Dataset& ds, std::span<const std::size_t> batch, std::span<const int> states,
                          const AugmentConfig& config, std::span<const double> channel_std,
                          std::uint64_t global_seed, std::uint64_t epoch) {
    if (batch.empty()) {
        throw ContractError("make_views: empty batch");
    }
    if (states.size() != ds.segments.size()) {
        throw DimensionError("make_views: need one stationarity state per segment");
    }
    AugmentedBatch out;
    out.batch = batch.size();
    out.channels = ds.channels;
    out.length = ds.length;
    const std::size_t grid = ds.channels * ds.length;
    out.weak.resize(out.batch * grid);
    out.strong.resize(out.batch * grid);
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const data::Segment& s = ds.segments.at(batch[b]);
        Rng weak_rng = make_rng(global_seed, {s.id, epoch, stream::kWeakView});
        Rng strong_rng = make_rng(global_seed, {s.id, epoch, stream::kStrongView});

        const auto jittered = jitter(s.values, ds.channels, config.jitter_sigma_weak, channel_std, weak_rng);
        const auto weak = scale(jittered, ds.channels, config.scale_sigma, weak_rng);

        const auto permuted = permute(s.values, ds.channels, config.max_segments, strong_rng);
        const auto strong = jitter(permuted, ds.channels, config.jitter_sigma_strong, channel_std, strong_rng);

        to_channel_major(weak, ds.length, ds.channels, std::span(out.weak).subspan(b * grid, grid));
        to_channel_major(strong, ds.length, ds.channels, std::span(out.strong).subspan(b * grid, grid));
        out.meta.push_back(ViewMeta{s.id, s.recording, s.index, states[s.id]});
    }
    return out;
}

}  // namespace statiocl::augment
