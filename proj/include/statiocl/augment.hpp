#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "statiocl/data/dataset.hpp"
#include "statiocl/rng.hpp"

/// Weak (jitter then scale) and strong (permute then jitter) views of a batch.
///
/// Values are time-major T x V grids. Noise magnitudes are expressed in units
/// of the per-channel training standard deviation.
namespace statiocl::augment {

struct AugmentConfig {
    double jitter_sigma_weak = 0.05;
    double jitter_sigma_strong = 0.8;
    double scale_sigma = 0.1;
    std::size_t max_segments = 8;
};

void validate(const AugmentConfig& config);

/// x + N(0, (sigma * channel_std[v])^2), i.i.d. per element.
std::vector<double> jitter(std::span<const double> x, std::size_t channels, double sigma,
                           std::span<const double> channel_std, Rng& rng);

/// Multiplies channel v by f_v ~ N(1, sigma^2) at every time step.
std::vector<double> scale(std::span<const double> x, std::size_t channels, double sigma, Rng& rng);

/// Cuts the time axis into m ~ U{2..max_segments} pieces (m = 1 when
/// max_segments == 1) at distinct uniform cut points and concatenates the
/// pieces in shuffled order. Returns the permuted grid; the source time index
/// of every output row is written to `order` when provided.
std::vector<double> permute(std::span<const double> x, std::size_t channels, std::size_t max_segments, Rng& rng,
                            std::vector<std::size_t>* order = nullptr);

/// Segment metadata carried alongside each view.
struct ViewMeta {
    std::size_t segment = 0;
    std::size_t recording = 0;
    std::size_t index = 0;
    int state = 0;  ///< inherited stationarity state
};

/// Paired views for a batch. weak/strong are [B x V x T] row-major, ready for the encoder.
struct AugmentedBatch {
    std::size_t batch = 0;
    std::size_t channels = 0;
    std::size_t length = 0;
    std::vector<double> weak;
    std::vector<double> strong;
    std::vector<ViewMeta> meta;
};

/// Per-sample stream seed = mix_seed(global_seed, {segment_id, epoch, view_tag}).
AugmentedBatch make_views(const data::Dataset& dataset, std::span<const std::size_t> batch,
                          std::span<const int> states, const AugmentConfig& config,
                          std::span<const double> channel_std, std::uint64_t global_seed, std::uint64_t epoch);

/// Converts a time-major T x V grid to channel-major V x T.
void to_channel_major(std::span<const double> x, std::size_t length, std::size_t channels, std::span<double> out);

}  // namespace statiocl::augment
