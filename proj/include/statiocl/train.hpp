#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "statiocl/augment.hpp"
#include "statiocl/contrast.hpp"
#include "statiocl/data/dataset.hpp"
#include "statiocl/encoder.hpp"
#include "statiocl/num/checkpoint.hpp"
#include "statiocl/num/optim.hpp"

namespace statiocl::train {

/// Which terms of the objective drive the gradient.
enum class Objective { Combined, NcOnly, TcOnly };

Objective parse_objective(const std::string& text);
const char* objective_name(Objective objective);

struct TrainConfig {
    std::size_t batch_size = 128;
    std::size_t epochs = 150;
    num::AdamConfig adam;
    std::uint64_t seed = 0;
    /// Write a checkpoint every this many epochs; 0 writes only the final one.
    std::size_t checkpoint_every = 0;
    /// Reshuffle the training split every epoch; otherwise batches follow index order.
    bool shuffle = true;
    Objective objective = Objective::Combined;
};

/// Throws ConfigError unless epochs >= 1 and batch_size >= 2.
void validate(const TrainConfig& config);

/// Batches of one epoch: a seeded permutation of `pool` (or `pool` itself when
/// `shuffle` is off) cut into consecutive groups of `batch_size`. A trailing
/// group smaller than `batch_size` is dropped.
std::vector<std::vector<std::size_t>> batch_schedule(std::span<const std::size_t> pool, std::size_t batch_size,
                                                     std::uint64_t seed, std::uint64_t epoch, bool shuffle);

/// Horizon used for temporal distances: the configured value, else the
/// recording size (the largest one when recordings differ in size).
std::size_t resolve_horizon(const data::Dataset& dataset, const contrast::ContrastConfig& config);

/// Per-channel standard deviation of the values the encoder sees (1 after normalization).
std::vector<double> channel_scale(const data::Dataset& dataset);

struct EpochLog {
    std::uint64_t epoch = 0;  ///< 1-based
    double loss = 0.0;        ///< mean over batches
    double nc = 0.0;
    double tc = 0.0;
    double wall_time = 0.0;  ///< seconds spent in the epoch
};

/// Header and one row per epoch: epoch,L,L_NC,L_TC,wall_time.
std::string format_log(std::span<const EpochLog> log);

struct TrainOptions {
    /// Where periodic and final checkpoints go; nothing is written when empty.
    std::filesystem::path checkpoint_dir;
    /// Continue from this state; its epoch counter is the number of epochs already done.
    std::optional<num::Checkpoint> resume;
    std::function<void(const EpochLog&)> on_epoch;
};

struct TrainResult {
    num::ParameterSet params;
    num::AdamState adam;
    std::uint64_t epochs_completed = 0;
    std::vector<EpochLog> log;  ///< epochs run by this call
    std::size_t horizon = 0;
};

/// Checkpoint file name for a given epoch, and the final one.
std::filesystem::path checkpoint_path(const std::filesystem::path& dir, std::uint64_t epoch);
std::filesystem::path final_checkpoint_path(const std::filesystem::path& dir);

/// Self-supervised pretraining on the training split. `states` holds one
/// stationarity state per dataset segment. Runs until `config.epochs` epochs
/// have completed in total, counting those restored from `options.resume`.
/// Deterministic for a fixed seed.
TrainResult pretrain(const data::Dataset& dataset, std::span<const int> states,
                     const encoder::EncoderConfig& encoder_config, const augment::AugmentConfig& augment_config,
                     const contrast::ContrastConfig& contrast_config, const TrainConfig& config,
                     const TrainOptions& options = {});

/// Loss of one fixed batch of views under `params` (no update).
contrast::LossBreakdown batch_loss(num::Tape& tape, std::span<const num::Var> params,
                                   const augment::AugmentedBatch& views, const encoder::EncoderConfig& encoder_config,
                                   const contrast::ContrastConfig& contrast_config);

}  // namespace statiocl::train
