#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "statiocl/contrast.hpp"
#include "statiocl/data/dataset.hpp"
#include "statiocl/encoder.hpp"
#include "statiocl/num/optim.hpp"
#include "statiocl/num/tensor.hpp"

namespace statiocl::evaluate {

struct ClassMetrics {
    int label = 0;
    /// False when the class has no ground-truth samples; such classes are left
    /// out of the macro averages.
    bool defined = true;
    std::size_t support = 0;
    double precision = 0.0;  ///< 0 when the class is never predicted
    double recall = 0.0;
    double f1 = 0.0;
    double average_precision = 0.0;
};

struct ProbeResult {
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    double macro_recall = 0.0;
    double auprc = 0.0;  ///< macro one-vs-rest average precision
    std::size_t samples = 0;
    std::vector<ClassMetrics> per_class;
    /// Probe bookkeeping (unset for plain metrics()).
    std::size_t train_samples = 0;
    std::size_t selected_epoch = 0;
    double validation_accuracy = 0.0;
};

/// Average precision: sum over distinct score thresholds (descending) of
/// (R_k - R_{k-1}) * P_k. Returns 0 when there are no positives.
double average_precision(std::span<const double> scores, std::span<const std::uint8_t> positive);

/// Accuracy, per-class precision/recall/F1 and one-vs-rest average precision.
/// `classes` lists the label values in score-column order; `scores` is N x C
/// (an empty tensor skips AUPRC). Throws ContractError on empty input.
ProbeResult metrics(std::span<const int> predictions, std::span<const int> labels, std::span<const int> classes,
                    const num::Tensor& scores);

struct ProbeConfig {
    double lr = 1e-3;
    std::size_t epochs = 100;
    double weight_decay = 1e-4;
    std::size_t batch_size = 32;
};

void validate(const ProbeConfig& config);

/// Softmax regression on standardized features. Trained with Adam on
/// `train`, the epoch with the best accuracy on `validation` is kept (the
/// last one when `validation` is empty) and scored on `test`.
/// Throws ConfigError when fewer than two classes occur in `train`.
ProbeResult probe(const num::Tensor& embeddings, std::span<const int> labels, std::span<const std::size_t> train,
                  std::span<const std::size_t> validation, std::span<const std::size_t> test,
                  const ProbeConfig& config, std::uint64_t seed);

/// probe() with the split indices taken from `splits` (one entry per row).
ProbeResult linear_probe(const num::Tensor& embeddings, std::span<const int> labels,
                         std::span<const data::Split> splits, const ProbeConfig& config, std::uint64_t seed);

/// round(fraction * n_c) indices of every class c in `pool`, in pool order.
/// Throws ConfigError when a class would receive no sample.
std::vector<std::size_t> stratified_subsample(std::span<const int> labels, std::span<const std::size_t> pool,
                                              double fraction, std::uint64_t seed);

struct FractionResult {
    double fraction = 1.0;
    std::optional<ProbeResult> result;  ///< empty when skipped
    std::string skipped_reason;
};

/// Retrains the probe on stratified subsamples of the training split; the
/// validation and test splits are unchanged. Unattainable fractions are skipped
/// with a warning.
std::vector<FractionResult> label_fraction_protocol(const num::Tensor& embeddings, std::span<const int> labels,
                                                    std::span<const data::Split> splits,
                                                    std::span<const double> fractions, const ProbeConfig& config,
                                                    std::uint64_t seed);

/// Table of the curve plus a line stating whether accuracy is non-increasing as labels shrink.
std::string format_fraction_report(std::span<const FractionResult> results);

std::string format_probe_result(const ProbeResult& result);

enum class Policy { Statiocl, Random };
const char* policy_name(Policy policy);

/// False-negative-pair tallies for one batch.
struct BatchFnp {
    std::size_t nc_pairs = 0;
    std::size_t nc_same_class = 0;
    double tc_mass = 0.0;
    double tc_same_class_mass = 0.0;
};

/// Rates are empty when their denominator is zero.
struct FnpRates {
    std::optional<double> hard;      ///< same-class nc pairs / nc pairs
    std::optional<double> weighted;  ///< same-class tc weight / tc weight
    std::optional<double> combined;  ///< both, nc pairs counted with weight 1
};

FnpRates rates(const BatchFnp& tally);

struct FnpReport {
    Policy policy = Policy::Statiocl;
    std::vector<BatchFnp> batches;
    FnpRates pooled;      ///< counts summed over the run
    FnpRates batch_mean;  ///< mean of per-batch rates over batches where defined
};

/// Replays `schedule` with the pair structure of `policy` and tallies how many
/// negatives share a ground-truth class. Reads the dataset only.
FnpReport fnp_audit(const data::Dataset& dataset, std::span<const int> states,
                    const contrast::ContrastConfig& config, std::span<const std::vector<std::size_t>> schedule,
                    Policy policy);

std::string format_fnp_reports(std::span<const FnpReport> reports);

/// Encoder outputs of every segment (un-augmented), N x output_dim, in segment order.
num::Tensor embed_dataset(const data::Dataset& dataset, const encoder::EncoderConfig& config,
                          const num::ParameterSet& params, std::size_t chunk = 256);

/// Writes `id,label,z0,...` rows (label `-` when absent) at full precision.
void embed_export(const data::Dataset& dataset, const num::Tensor& embeddings, const std::filesystem::path& out);

/// Labels of every segment; throws ConfigError if any is missing.
std::vector<int> require_labels(const data::Dataset& dataset);

}  // namespace statiocl::evaluate
