#include "statiocl/stationarity/adf.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "statiocl/error.hpp"
#include "statiocl/kvfile.hpp"
#include "statiocl/log.hpp"
#include "statiocl/stationarity/ols.hpp"

namespace statiocl::stationarity {

namespace {

// MacKinnon (1994) response surface, constant-only case, one I(1) series.
// p = Phi(polyval(coefs, t)) with coefs in ascending powers of t.
constexpr double kTauMax = 2.74;
constexpr double kTauMin = -18.83;
constexpr double kTauStar = -1.61;
constexpr double kSmallP[] = {2.1659, 1.4412, 0.038269};
constexpr double kLargeP[] = {1.7339, 0.93202, -0.12745, -0.010368};

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

template <std::size_t N>
double polyval_ascending(const double (&coefs)[N], double x) {
    double acc = 0.0;
    for (std::size_t i = N; i-- > 0;) acc = acc * x + coefs[i];
    return acc;
}

std::vector<double> differences(std::span<const double> y) {
    std::vector<double> dy(y.size() - 1);
    for (std::size_t t = 0; t + 1 < y.size(); ++t) dy[t] = y[t + 1] - y[t];
    if (std::all_of(dy.begin(), dy.end(), [&](double d) { return d == dy.front(); })) {
        throw DegenerateInputError("adf_test: differenced series has zero variance");
    }
    return dy;
}

void require_length(std::size_t len, std::size_t lags) {
    if (len < lags + kMinimumObservations) {
        throw LengthError("adf_test: series of length " + std::to_string(len) + " is too short for lag order " +
                          std::to_string(lags) + " (need at least " +
                          std::to_string(lags + kMinimumObservations) + ")");
    }
}

// Rows k = first .. len-2: response dy[k]; columns [1, y[k], dy[k-1], ..., dy[k-lags]].
void build_regression(std::span<const double> y, const std::vector<double>& dy, std::size_t first,
                      std::size_t lags, num::Tensor& design, std::vector<double>& response) {
    const std::size_t rows = y.size() - 1 - first;
    design = num::Tensor({rows, 2 + lags});
    response.assign(rows, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t k = r + first;
        response[r] = dy[k];
        design.at(r, 0) = 1.0;
        design.at(r, 1) = y[k];
        for (std::size_t i = 1; i <= lags; ++i) design.at(r, 1 + i) = dy[k - i];
    }
}

}  // namespace

std::size_t schwert_lag(std::size_t length) {
    return static_cast<std::size_t>(std::floor(12.0 * std::pow(static_cast<double>(length) / 100.0, 0.25)));
}

double mackinnon_p_value(double statistic) {
    if (statistic > kTauMax) return 1.0;
    if (statistic < kTauMin) return 0.0;
    if (statistic <= kTauStar) return normal_cdf(polyval_ascending(kSmallP, statistic));
    return normal_cdf(polyval_ascending(kLargeP, statistic));
}

AdfResult adf_test(std::span<const double> y, std::optional<std::size_t> lag_order) {
    const std::size_t len = y.size();
    const std::size_t lags = lag_order.value_or(schwert_lag(len));
    require_length(len, lags);
    const std::vector<double> dy = differences(y);
    num::Tensor design;
    std::vector<double> response;
    build_regression(y, dy, lags, lags, design, response);
    const std::size_t rows = response.size();
    OlsFit fit;
    try {
        fit = ols_fit(design, response);
    } catch (const SingularMatrixError& e) {
        throw DegenerateInputError(std::string("adf_test: degenerate regression (") + e.what() + ")");
    }
    if (!(fit.standard_errors[1] > 0.0)) {
        throw DegenerateInputError("adf_test: regression fits exactly, statistic undefined");
    }
    AdfResult result;
    result.statistic = fit.coefficients[1] / fit.standard_errors[1];
    result.p_value = std::clamp(mackinnon_p_value(result.statistic), kMinPValue, kMaxPValue);
    result.lag_order = lags;
    result.n_effective = rows;
    return result;
}

LagPolicy LagPolicy::parse(const std::string& text) {
    const auto colon = text.find(':');
    const std::string name = trim(text.substr(0, colon));
    LagPolicy policy;
    if (name == "aic") {
        policy.method = Method::Aic;
    } else if (name == "fixed") {
        policy.method = Method::Fixed;
    } else {
        throw ConfigError("unknown ADF lag policy '" + text + "' (expected aic, aic:<max>, fixed or fixed:<lag>)");
    }
    if (colon != std::string::npos) policy.lag = parse_size(text.substr(colon + 1), "ADF lag");
    return policy;
}

std::string LagPolicy::to_string() const {
    std::string out = method == Method::Aic ? "aic" : "fixed";
    if (lag) out += ":" + std::to_string(*lag);
    return out;
}

std::size_t select_lag_aic(std::span<const double> y, std::size_t max_lag) {
    require_length(y.size(), max_lag);
    const std::vector<double> dy = differences(y);
    const auto nobs = static_cast<double>(y.size() - 1 - max_lag);
    std::optional<std::pair<double, std::size_t>> best;
    num::Tensor design;
    std::vector<double> response;
    for (std::size_t p = 0; p <= max_lag; ++p) {
        build_regression(y, dy, max_lag, p, design, response);
        OlsFit fit;
        try {
            fit = ols_fit(design, response);
        } catch (const SingularMatrixError&) {
            continue;
        }
        const double llf = -0.5 * nobs * (std::log(2.0 * std::numbers::pi) + std::log(fit.rss / nobs) + 1.0);
        const double aic = -2.0 * llf + 2.0 * static_cast<double>(p + 2);
        if (!best || aic < best->first) best = std::make_pair(aic, p);
    }
    if (!best) throw DegenerateInputError("adf_test: every candidate lag gives a singular regression");
    return best->second;
}

AdfResult adf_test(std::span<const double> y, const LagPolicy& policy) {
    const std::size_t lag = policy.lag.value_or(schwert_lag(y.size()));
    if (policy.method == LagPolicy::Method::Fixed) return adf_test(y, lag);
    return adf_test(y, select_lag_aic(y, lag));
}

StationarityLabel assess_segment(const data::Segment& segment, std::size_t length, std::size_t channels,
                                 double threshold, const LagPolicy& lag_order) {
    if (!(threshold > 0.0 && threshold < 1.0)) {
        throw ConfigError("ADF threshold must lie in (0, 1), got " + format_double(threshold));
    }
    if (segment.values.size() != length * channels) {
        throw DimensionError("assess_segment: segment " + std::to_string(segment.id) + " has " +
                             std::to_string(segment.values.size()) + " values, expected " +
                             std::to_string(length * channels));
    }
    StationarityLabel label;
    label.threshold = threshold;
    std::size_t votes = 0;
    std::vector<double> channel(length);
    for (std::size_t v = 0; v < channels; ++v) {
        for (std::size_t t = 0; t < length; ++t) channel[t] = segment.values[t * channels + v];
        try {
            const AdfResult r = adf_test(channel, lag_order);
            label.channel_p_values.push_back(r.p_value);
            label.degenerate.push_back(false);
            if (r.p_value > threshold) ++votes;
        } catch (const DegenerateInputError&) {
            warn("segment " + std::to_string(segment.id) + " channel " + std::to_string(v) +
                 " has no variation; counted as stationary");
            label.channel_p_values.push_back(std::numeric_limits<double>::quiet_NaN());
            label.degenerate.push_back(true);
        }
    }
    label.state = 2 * votes >= channels ? 1 : 0;
    return label;
}

std::optional<double> StateCounts::ratio() const {
    if (non_stationary == 0) return std::nullopt;
    return static_cast<double>(stationary) / static_cast<double>(non_stationary);
}

std::vector<int> DatasetAssessment::states() const {
    std::vector<int> out;
    out.reserve(labels.size());
    for (const auto& l : labels) out.push_back(l.state);
    return out;
}

namespace {

void summarize(const data::Dataset& ds, DatasetAssessment& a) {
    a.overall = {};
    a.per_class.clear();
    const bool labelled = ds.has_labels();
    for (std::size_t i = 0; i < a.labels.size(); ++i) {
        auto bump = [&](StateCounts& c) { (a.labels[i].state == 1 ? c.non_stationary : c.stationary) += 1; };
        bump(a.overall);
        if (labelled) bump(a.per_class[*ds.segments[i].label]);
    }
}

}  // namespace

DatasetAssessment assess_dataset(const data::Dataset& ds, double threshold, const LagPolicy& lag_order) {
    if (ds.segments.empty()) {
        throw ConfigError("assess_dataset: dataset '" + ds.name + "' is empty");
    }
    DatasetAssessment a;
    a.labels.reserve(ds.segments.size());
    for (const auto& s : ds.segments) a.labels.push_back(assess_segment(s, ds.length, ds.channels, threshold, lag_order));
    summarize(ds, a);
    return a;
}

DatasetAssessment assess_dataset_cached(const data::Dataset& ds, double threshold, const LagPolicy& lag_order,
                                        const std::filesystem::path& cache_dir) {
    std::ostringstream key;
    key << "adf_" << std::hex << data::dataset_hash(ds) << std::dec << "_t" << format_double(threshold) << "_"
        << lag_order.to_string() << ".csv";
    const auto path = cache_dir / key.str();

    if (std::filesystem::exists(path)) {
        std::ifstream in(path);
        DatasetAssessment a;
        std::string line;
        bool ok = static_cast<bool>(std::getline(in, line));  // header
        while (ok && std::getline(in, line)) {
            const auto fields = split_list(line);
            if (fields.size() != 2 + ds.channels) { ok = false; break; }
            StationarityLabel l;
            l.threshold = threshold;
            try {
                l.state = static_cast<int>(parse_int(fields[1], "state"));
                for (std::size_t v = 0; v < ds.channels; ++v) {
                    const double p = parse_double(fields[2 + v], "p_value");
                    l.channel_p_values.push_back(p);
                    l.degenerate.push_back(std::isnan(p));
                }
            } catch (const ConfigError&) {
                ok = false;
                break;
            }
            a.labels.push_back(std::move(l));
        }
        if (ok && a.labels.size() == ds.segments.size()) {
            summarize(ds, a);
            return a;
        }
        warn("ignoring unreadable stationarity cache " + path.string());
    }

    DatasetAssessment a = assess_dataset(ds, threshold, lag_order);
    std::filesystem::create_directories(cache_dir);
    std::ofstream out(path);
    if (out) {
        out << "segment,state";
        for (std::size_t v = 0; v < ds.channels; ++v) out << ",p" << v;
        out << '\n';
        for (std::size_t i = 0; i < a.labels.size(); ++i) {
            out << i << ',' << a.labels[i].state;
            for (double p : a.labels[i].channel_p_values) out << ',' << (std::isnan(p) ? "nan" : format_double(p));
            out << '\n';
        }
    }
    return a;
}

}  // namespace statiocl::stationarity
