#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "statiocl/data/dataset.hpp"

namespace statiocl::stationarity {

/// Augmented Dickey-Fuller result for the constant-only (no trend) regression
///   dy_t = c + gamma * y_{t-1} + sum_{i=1..p} phi_i * dy_{t-i} + e_t.
struct AdfResult {
    double statistic = 0.0;  ///< gamma_hat / SE(gamma_hat)
    double p_value = 1.0;    ///< MacKinnon approximation, clamped to [kMinPValue, kMaxPValue]
    std::size_t lag_order = 0;
    std::size_t n_effective = 0;  ///< T - 1 - lag_order

    friend bool operator==(const AdfResult&, const AdfResult&) = default;
};

inline constexpr double kMinPValue = 1e-4;
inline constexpr double kMaxPValue = 0.9999;
inline constexpr double kDefaultThreshold = 0.01;
inline constexpr std::size_t kMinimumObservations = 10;

/// floor(12 * (T / 100)^(1/4))
std::size_t schwert_lag(std::size_t length);

/// Asymptotic p-value of an ADF t-statistic (constant, no trend; MacKinnon
/// 1994 response surface). Unclamped: 0 below the table range, 1 above.
double mackinnon_p_value(double statistic);

/// Fixed lag order (schwert_lag(T) when empty). Throws LengthError if
/// T < lag_order + kMinimumObservations and DegenerateInputError when the
/// differenced series has zero variance or the regression fits exactly.
AdfResult adf_test(std::span<const double> series, std::optional<std::size_t> lag_order = std::nullopt);

/// How the augmentation lag order is chosen.
struct LagPolicy {
    enum class Method { Aic, Fixed };
    Method method = Method::Aic;
    /// Fixed: the lag order. Aic: the largest lag considered. schwert_lag(T) when empty.
    std::optional<std::size_t> lag;

    static LagPolicy fixed(std::optional<std::size_t> lag = std::nullopt) { return {Method::Fixed, lag}; }
    static LagPolicy aic(std::optional<std::size_t> max_lag = std::nullopt) { return {Method::Aic, max_lag}; }
    /// "aic", "aic:<max>", "fixed" or "fixed:<lag>".
    static LagPolicy parse(const std::string& text);
    [[nodiscard]] std::string to_string() const;
};

/// Lag in 0..max_lag minimizing the Gaussian AIC of the test regression, all
/// candidates fitted on the common sample of the largest lag (ties pick the
/// smaller lag).
std::size_t select_lag_aic(std::span<const double> series, std::size_t max_lag);

/// adf_test with the lag order chosen by `policy`.
AdfResult adf_test(std::span<const double> series, const LagPolicy& policy);

/// Binary non-stationarity state of one segment.
struct StationarityLabel {
    int state = 0;  ///< 1 = non-stationary, 0 = stationary
    double threshold = kDefaultThreshold;
    std::vector<double> channel_p_values;  ///< NaN for degenerate channels
    std::vector<bool> degenerate;

    friend bool operator==(const StationarityLabel&, const StationarityLabel&) = default;
};

/// Runs adf_test per channel; state = 1 when at least half of the channels have
/// p > threshold (ties count as non-stationary). A constant channel votes
/// stationary and raises a warning. Threshold must lie in (0, 1).
StationarityLabel assess_segment(const data::Segment& segment, std::size_t length, std::size_t channels,
                                 double threshold, const LagPolicy& lags = {});

struct StateCounts {
    std::size_t stationary = 0;
    std::size_t non_stationary = 0;
    /// stationary / non_stationary; empty when undefined (no non-stationary segments).
    [[nodiscard]] std::optional<double> ratio() const;
};

struct DatasetAssessment {
    std::vector<StationarityLabel> labels;  ///< input order
    StateCounts overall;
    std::map<int, StateCounts> per_class;  ///< only when the dataset is labelled

    [[nodiscard]] std::vector<int> states() const;
};

DatasetAssessment assess_dataset(const data::Dataset& dataset, double threshold, const LagPolicy& lags = {});

/// As assess_dataset, memoized in `cache_dir` under a file keyed by
/// dataset_hash, threshold and lag policy.
DatasetAssessment assess_dataset_cached(const data::Dataset& dataset, double threshold, const LagPolicy& lags,
                                        const std::filesystem::path& cache_dir);

/// Marker printed for an undefined ratio.
inline constexpr const char* kUndefined = "undefined";

}  // namespace statiocl::stationarity
