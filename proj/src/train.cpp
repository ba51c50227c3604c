#include "statiocl/train.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <sstream>

#include "statiocl/error.hpp"
#include "statiocl/kvfile.hpp"
#include "statiocl/rng.hpp"

namespace statiocl::train {

Objective parse_objective(const std::string& text) {
    if (text == "combined") return Objective::Combined;
    if (text == "nc") return Objective::NcOnly;
    if (text == "tc") return Objective::TcOnly;
    throw ConfigError("unknown objective '" + text + "' (expected combined, nc or tc)");
}

const char* objective_name(Objective objective) {
    switch (objective) {
        case Objective::Combined: return "combined";
        case Objective::NcOnly: return "nc";
        case Objective::TcOnly: return "tc";
    }
    return "combined";
}

void validate(const TrainConfig& c) {
    if (c.epochs < 1) throw ConfigError("train epochs must be at least 1");
    if (c.batch_size < 2) throw ConfigError("train batch_size must be at least 2");
    if (!(c.adam.lr > 0.0)) throw ConfigError("train lr must be positive");
    if (!(c.adam.weight_decay >= 0.0)) throw ConfigError("train weight_decay must be non-negative");
    if (!(c.adam.beta1 >= 0.0 && c.adam.beta1 < 1.0) || !(c.adam.beta2 >= 0.0 && c.adam.beta2 < 1.0)) {
        throw ConfigError("train betas must lie in [0, 1)");
    }
    if (!(c.adam.eps > 0.0)) throw ConfigError("train eps must be positive");
}

std::vector<std::vector<std::size_t>> batch_schedule(std::span<const std::size_t> pool, std::size_t batch_size,
                                                     std::uint64_t seed, std::uint64_t epoch, bool shuffle) {
    if (batch_size == 0) throw ContractError("batch_schedule: batch_size must be positive");
    std::vector<std::size_t> order(pool.begin(), pool.end());
    if (shuffle) {
        Rng rng = make_rng(seed, {epoch, stream::kShuffle});
        std::shuffle(order.begin(), order.end(), rng);
    }
    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start + batch_size <= order.size(); start += batch_size) {
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(start + batch_size));
    }
    return batches;
}

std::size_t resolve_horizon(const data::Dataset& ds, const contrast::ContrastConfig& c) {
    if (c.horizon > 0) return c.horizon;
    std::size_t longest = 0;
    for (const auto& r : ds.recordings) longest = std::max(longest, r.count);
    return std::max<std::size_t>(longest, 1);
}

std::vector<double> channel_scale(const data::Dataset& ds) {
    if (ds.normalized) return std::vector<double>(ds.channels, 1.0);
    std::vector<double> s = ds.normalization ? ds.normalization->stddev : data::compute_normalization(ds).stddev;
    for (double& v : s)
        if (!(v > 0.0)) v = 1.0;
    return s;
}

std::string format_log(std::span<const EpochLog> log) {
    std::ostringstream out;
    out << "epoch,L,L_NC,L_TC,wall_time\n";
    for (const auto& e : log) {
        out << e.epoch << ',' << format_double(e.loss) << ',' << format_double(e.nc) << ',' << format_double(e.tc)
            << ',' << format_double(e.wall_time) << '\n';
    }
    return out.str();
}

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, std::uint64_t epoch) {
    return dir / ("epoch_" + std::to_string(epoch) + ".ckpt");
}

std::filesystem::path final_checkpoint_path(const std::filesystem::path& dir) { return dir / "final.ckpt"; }

contrast::LossBreakdown batch_loss(num::Tape& tape, std::span<const num::Var> params,
                                   const augment::AugmentedBatch& views, const encoder::EncoderConfig& enc,
                                   const contrast::ContrastConfig& con) {
    const num::Shape shape{views.batch, views.channels, views.length};
    const num::Var weak = tape.constant(num::Tensor(shape, views.weak));
    const num::Var strong = tape.constant(num::Tensor(shape, views.strong));
    const num::Var z_a = encoder::encode(enc, params, weak);
    const num::Var z_b = encoder::encode(enc, params, strong);
    std::vector<int> states;
    std::vector<contrast::SegmentMeta> meta;
    for (const auto& m : views.meta) {
        states.push_back(m.state);
        meta.push_back({m.recording, m.index});
    }
    const auto pairs = contrast::build_pair_structure(states, meta, con);
    return contrast::combined_loss(z_a, z_b, pairs, con);
}

TrainResult pretrain(const data::Dataset& ds, std::span<const int> states, const encoder::EncoderConfig& enc,
                     const augment::AugmentConfig& aug, const contrast::ContrastConfig& con_in,
                     const TrainConfig& config, const TrainOptions& options) {
    validate(config);
    augment::validate(aug);
    contrast::validate(con_in);
    if (ds.segments.empty()) throw ConfigError("pretrain: dataset has no segments");
    if (states.size() != ds.segments.size()) {
        throw DimensionError("pretrain: expected " + std::to_string(ds.segments.size()) +
                             " stationarity states, got " + std::to_string(states.size()));
    }
    if (enc.in_channels != ds.channels) {
        throw ConfigError("pretrain: encoder in_channels " + std::to_string(enc.in_channels) +
                          " does not match dataset channels " + std::to_string(ds.channels));
    }
    encoder::validate(enc, ds.length);
    const auto pool = ds.indices(data::Split::Train);
    if (pool.size() < config.batch_size) {
        throw ConfigError("pretrain: training split has " + std::to_string(pool.size()) +
                          " segments, fewer than batch_size " + std::to_string(config.batch_size));
    }

    contrast::ContrastConfig con = con_in;
    con.horizon = resolve_horizon(ds, con_in);
    const std::vector<double> scale = channel_scale(ds);

    TrainResult result;
    result.horizon = con.horizon;
    if (options.resume) {
        const num::Checkpoint& ck = *options.resume;
        result.params = encoder::encoder_init(enc, config.seed);
        num::require_matching_layout(result.params, ck.params);
        if (!ck.adam) throw LoadError("resume: checkpoint carries no optimizer state");
        result.params = ck.params;
        result.adam = *ck.adam;
        result.epochs_completed = ck.epoch;
    } else {
        result.params = encoder::encoder_init(enc, config.seed);
        result.adam = num::adam_init(result.params);
    }

    auto save = [&](const std::filesystem::path& path) {
        num::save_checkpoint(path, num::Checkpoint{result.epochs_completed, result.params, result.adam});
    };
    if (!options.checkpoint_dir.empty()) std::filesystem::create_directories(options.checkpoint_dir);

    while (result.epochs_completed < config.epochs) {
        const std::uint64_t epoch = result.epochs_completed;
        const auto started = std::chrono::steady_clock::now();
        const auto batches = batch_schedule(pool, config.batch_size, config.seed, epoch, config.shuffle);
        double sum_loss = 0.0, sum_nc = 0.0, sum_tc = 0.0;
        for (const auto& batch : batches) {
            const auto views = augment::make_views(ds, batch, states, aug, scale, config.seed, epoch);
            num::Tape tape;
            std::vector<num::Var> vars;
            vars.reserve(result.params.size());
            for (const auto& p : result.params) vars.push_back(tape.leaf(p.value));
            const auto loss = batch_loss(tape, vars, views, enc, con);
            const num::Var objective = config.objective == Objective::NcOnly   ? loss.nc
                                       : config.objective == Objective::TcOnly ? loss.tc
                                                                               : loss.total;
            tape.backward(objective);
            std::vector<num::Tensor> grads;
            grads.reserve(vars.size());
            for (const auto& v : vars) grads.push_back(tape.grad(v));
            num::adam_step(result.params, grads, result.adam, config.adam);
            sum_loss += objective.value().item();
            sum_nc += loss.nc.value().item();
            sum_tc += loss.tc.value().item();
        }
        const double n = static_cast<double>(batches.size());
        EpochLog entry;
        entry.epoch = epoch + 1;
        entry.loss = sum_loss / n;
        entry.nc = sum_nc / n;
        entry.tc = sum_tc / n;
        entry.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        result.epochs_completed = epoch + 1;
        result.log.push_back(entry);
        if (options.on_epoch) options.on_epoch(entry);
        if (!options.checkpoint_dir.empty() && config.checkpoint_every > 0 &&
            result.epochs_completed % config.checkpoint_every == 0) {
            save(checkpoint_path(options.checkpoint_dir, result.epochs_completed));
        }
    }
    if (!options.checkpoint_dir.empty()) save(final_checkpoint_path(options.checkpoint_dir));
    return result;
}

}  // namespace statiocl::train
