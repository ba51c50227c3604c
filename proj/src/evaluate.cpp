#include "statiocl/evaluate.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "statiocl/augment.hpp"
#include "statiocl/error.hpp"
#include "statiocl/kvfile.hpp"
#include "statiocl/log.hpp"
#include "statiocl/rng.hpp"
#include "statiocl/train.hpp"

namespace statiocl::evaluate {

double average_precision(std::span<const double> scores, std::span<const std::uint8_t> positive) {
    if (scores.size() != positive.size()) throw DimensionError("average_precision: scores and labels differ in length");
    const auto total_pos = static_cast<double>(std::count(positive.begin(), positive.end(), std::uint8_t{1}));
    if (total_pos == 0.0) return 0.0;
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    double tp = 0.0, fp = 0.0, prev_recall = 0.0, ap = 0.0;
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (positive[order[i]]) tp += 1.0; else fp += 1.0;
        // Close a threshold group only where the score changes.
        if (i + 1 < order.size() && scores[order[i + 1]] == scores[order[i]]) continue;
        const double recall = tp / total_pos;
        ap += (recall - prev_recall) * (tp / (tp + fp));
        prev_recall = recall;
    }
    return ap;
}

ProbeResult metrics(std::span<const int> predictions, std::span<const int> labels, std::span<const int> classes,
                    const num::Tensor& scores) {
    const std::size_t n = labels.size();
    if (n == 0) throw ContractError("metrics: empty input");
    if (predictions.size() != n) throw DimensionError("metrics: predictions and labels differ in length");
    if (classes.empty()) throw ContractError("metrics: no classes");
    const bool with_scores = !scores.shape().empty();
    if (with_scores && (scores.rank() != 2 || scores.dim(0) != n || scores.dim(1) != classes.size())) {
        throw DimensionError("metrics: scores " + num::shape_string(scores.shape()) + " do not match " +
                             std::to_string(n) + " samples x " + std::to_string(classes.size()) + " classes");
    }
    ProbeResult r;
    r.samples = n;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) correct += predictions[i] == labels[i] ? 1 : 0;
    r.accuracy = static_cast<double>(correct) / static_cast<double>(n);

    std::size_t defined = 0;
    double f1_sum = 0.0, recall_sum = 0.0, ap_sum = 0.0;
    for (std::size_t c = 0; c < classes.size(); ++c) {
        ClassMetrics m;
        m.label = classes[c];
        std::size_t tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const bool truth = labels[i] == m.label, pred = predictions[i] == m.label;
            tp += truth && pred;
            fp += !truth && pred;
            fn += truth && !pred;
        }
        m.support = tp + fn;
        m.defined = m.support > 0;
        if (!m.defined) {
            warn("metrics: class " + std::to_string(m.label) + " has no samples; excluded from macro averages");
            r.per_class.push_back(m);
            continue;
        }
        m.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
        m.recall = static_cast<double>(tp) / static_cast<double>(m.support);
        m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
        if (with_scores) {
            std::vector<double> column(n);
            std::vector<std::uint8_t> positive(n);
            for (std::size_t i = 0; i < n; ++i) {
                column[i] = scores[i * classes.size() + c];
                positive[i] = labels[i] == m.label ? 1 : 0;
            }
            m.average_precision = average_precision(column, positive);
        } else {
            m.average_precision = std::numeric_limits<double>::quiet_NaN();
        }
        ++defined;
        f1_sum += m.f1;
        recall_sum += m.recall;
        ap_sum += m.average_precision;
        r.per_class.push_back(m);
    }
    const double d = static_cast<double>(defined);
    r.macro_f1 = f1_sum / d;
    r.macro_recall = recall_sum / d;
    r.auprc = ap_sum / d;
    return r;
}

void validate(const ProbeConfig& c) {
    if (!(c.lr > 0.0)) throw ConfigError("probe lr must be positive");
    if (c.epochs < 1) throw ConfigError("probe epochs must be at least 1");
    if (!(c.weight_decay >= 0.0)) throw ConfigError("probe weight_decay must be non-negative");
    if (c.batch_size < 1) throw ConfigError("probe batch_size must be at least 1");
}

namespace {

struct Softmax {
    std::size_t dim = 0;
    std::vector<int> classes;
    num::ParameterSet params;  ///< weight [D x C], bias [C]

    // Class probabilities of standardized rows.
    void forward(const std::vector<double>& x, std::size_t rows, std::vector<double>& prob) const {
        const std::size_t c = classes.size();
        const auto w = params[0].value.data();
        const auto b = params[1].value.data();
        prob.assign(rows * c, 0.0);
        for (std::size_t r = 0; r < rows; ++r) {
            double* p = &prob[r * c];
            for (std::size_t k = 0; k < c; ++k) p[k] = b[k];
            for (std::size_t j = 0; j < dim; ++j) {
                const double xv = x[r * dim + j];
                for (std::size_t k = 0; k < c; ++k) p[k] += xv * w[j * c + k];
            }
            const double top = *std::max_element(p, p + c);
            double z = 0.0;
            for (std::size_t k = 0; k < c; ++k) z += (p[k] = std::exp(p[k] - top));
            for (std::size_t k = 0; k < c; ++k) p[k] /= z;
        }
    }
};

std::size_t argmax_row(const std::vector<double>& prob, std::size_t row, std::size_t c) {
    const double* p = &prob[row * c];
    return static_cast<std::size_t>(std::max_element(p, p + c) - p);
}

}  // namespace

ProbeResult probe(const num::Tensor& emb, std::span<const int> labels, std::span<const std::size_t> train,
                  std::span<const std::size_t> validation, std::span<const std::size_t> test,
                  const ProbeConfig& config, std::uint64_t seed) {
    validate(config);
    if (emb.rank() != 2 || emb.dim(0) != labels.size()) {
        throw DimensionError("probe: embeddings " + num::shape_string(emb.shape()) + " do not match " +
                             std::to_string(labels.size()) + " labels");
    }
    if (test.empty()) throw ConfigError("probe: test split is empty");
    const std::size_t dim = emb.dim(1);

    Softmax model;
    model.dim = dim;
    {
        std::set<int> seen;
        for (std::size_t i : train) seen.insert(labels[i]);
        model.classes.assign(seen.begin(), seen.end());
    }
    if (model.classes.size() < 2) throw ConfigError("probe: training split needs at least 2 classes");
    const std::size_t c = model.classes.size();
    std::map<int, std::size_t> column;
    for (std::size_t k = 0; k < c; ++k) column[model.classes[k]] = k;

    std::vector<double> mean(dim, 0.0), sd(dim, 0.0);
    for (std::size_t i : train)
        for (std::size_t j = 0; j < dim; ++j) mean[j] += emb[i * dim + j];
    for (double& m : mean) m /= static_cast<double>(train.size());
    for (std::size_t i : train)
        for (std::size_t j = 0; j < dim; ++j) sd[j] += (emb[i * dim + j] - mean[j]) * (emb[i * dim + j] - mean[j]);
    for (double& s : sd) {
        s = std::sqrt(s / static_cast<double>(train.size()));
        if (!(s > 0.0)) s = 1.0;
    }
    auto gather = [&](std::span<const std::size_t> rows) {
        std::vector<double> x(rows.size() * dim);
        for (std::size_t r = 0; r < rows.size(); ++r)
            for (std::size_t j = 0; j < dim; ++j) x[r * dim + j] = (emb[rows[r] * dim + j] - mean[j]) / sd[j];
        return x;
    };
    auto accuracy = [&](std::span<const std::size_t> rows, const std::vector<double>& x) {
        std::vector<double> prob;
        model.forward(x, rows.size(), prob);
        std::size_t hit = 0;
        for (std::size_t r = 0; r < rows.size(); ++r) hit += model.classes[argmax_row(prob, r, c)] == labels[rows[r]];
        return static_cast<double>(hit) / static_cast<double>(rows.size());
    };

    model.params = {{"probe.weight", num::Tensor({dim, c})}, {"probe.bias", num::Tensor({c})}};
    num::AdamState adam = num::adam_init(model.params);
    num::AdamConfig opt;
    opt.lr = config.lr;
    opt.weight_decay = config.weight_decay;
    const std::vector<double> x_val = gather(validation);

    num::ParameterSet best = model.params;
    double best_val = -1.0;
    std::size_t best_epoch = 0;
    std::vector<std::size_t> order(train.begin(), train.end());
    std::vector<double> prob;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        Rng rng = make_rng(seed, {epoch, stream::kProbe});
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t rows = std::min(config.batch_size, order.size() - start);
            const std::span<const std::size_t> batch(order.data() + start, rows);
            const std::vector<double> x = gather(batch);
            model.forward(x, rows, prob);
            std::vector<num::Tensor> grads{num::Tensor({dim, c}), num::Tensor({c})};
            auto gw = grads[0].data();
            auto gb = grads[1].data();
            const double inv = 1.0 / static_cast<double>(rows);
            for (std::size_t r = 0; r < rows; ++r) {
                prob[r * c + column.at(labels[batch[r]])] -= 1.0;
                for (std::size_t k = 0; k < c; ++k) {
                    const double g = prob[r * c + k] * inv;
                    gb[k] += g;
                    for (std::size_t j = 0; j < dim; ++j) gw[j * c + k] += x[r * dim + j] * g;
                }
            }
            num::adam_step(model.params, grads, adam, opt);
        }
        if (!validation.empty()) {
            const double acc = accuracy(validation, x_val);
            if (acc > best_val) {
                best_val = acc;
                best = model.params;
                best_epoch = epoch + 1;
            }
        }
    }
    if (validation.empty()) {
        best_epoch = config.epochs;
        best_val = std::numeric_limits<double>::quiet_NaN();
    } else {
        model.params = best;
    }

    const std::vector<double> x_test = gather(test);
    model.forward(x_test, test.size(), prob);
    std::vector<int> predicted(test.size()), truth(test.size());
    for (std::size_t r = 0; r < test.size(); ++r) {
        predicted[r] = model.classes[argmax_row(prob, r, c)];
        truth[r] = labels[test[r]];
        if (!column.contains(truth[r])) {
            warn("probe: test label " + std::to_string(truth[r]) + " never occurs in the training split");
        }
    }
    ProbeResult result = metrics(predicted, truth, model.classes, num::Tensor({test.size(), c}, prob));
    result.train_samples = train.size();
    result.selected_epoch = best_epoch;
    result.validation_accuracy = best_val;
    return result;
}

ProbeResult linear_probe(const num::Tensor& emb, std::span<const int> labels, std::span<const data::Split> splits,
                         const ProbeConfig& config, std::uint64_t seed) {
    if (splits.size() != labels.size()) throw DimensionError("linear_probe: splits and labels differ in length");
    std::array<std::vector<std::size_t>, 3> idx;
    for (std::size_t i = 0; i < splits.size(); ++i) idx[static_cast<std::size_t>(splits[i])].push_back(i);
    return probe(emb, labels, idx[0], idx[1], idx[2], config, seed);
}

std::vector<std::size_t> stratified_subsample(std::span<const int> labels, std::span<const std::size_t> pool,
                                              double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw ConfigError("label fraction " + format_double(fraction) + " must lie in (0, 1]");
    }
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i : pool) by_class[labels[i]].push_back(i);
    std::vector<std::uint8_t> keep(labels.size(), 0);
    Rng rng = make_rng(seed, {stream::kSubsample, std::bit_cast<std::uint64_t>(fraction)});
    for (const auto& [label, members] : by_class) {
        const auto take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(members.size())));
        if (take == 0) {
            throw ConfigError("label fraction " + format_double(fraction) + " leaves class " + std::to_string(label) +
                              " (" + std::to_string(members.size()) + " samples) without training data");
        }
        std::vector<std::size_t> chosen;
        std::sample(members.begin(), members.end(), std::back_inserter(chosen), take, rng);
        for (std::size_t i : chosen) keep[i] = 1;
    }
    std::vector<std::size_t> out;
    for (std::size_t i : pool)
        if (keep[i]) out.push_back(i);
    return out;
}

std::vector<FractionResult> label_fraction_protocol(const num::Tensor& emb, std::span<const int> labels,
                                                    std::span<const data::Split> splits,
                                                    std::span<const double> fractions, const ProbeConfig& config,
                                                    std::uint64_t seed) {
    if (splits.size() != labels.size()) {
        throw DimensionError("label_fraction_protocol: splits and labels differ in length");
    }
    std::array<std::vector<std::size_t>, 3> idx;
    for (std::size_t i = 0; i < splits.size(); ++i) idx[static_cast<std::size_t>(splits[i])].push_back(i);
    std::vector<FractionResult> out;
    for (double f : fractions) {
        FractionResult entry;
        entry.fraction = f;
        try {
            const auto subset = stratified_subsample(labels, idx[0], f, seed);
            entry.result = probe(emb, labels, subset, idx[1], idx[2], config, seed);
        } catch (const ConfigError& e) {
            entry.skipped_reason = e.what();
            warn("label fraction " + format_double(f) + " skipped: " + entry.skipped_reason);
        }
        out.push_back(std::move(entry));
    }
    return out;
}

std::string format_fraction_report(std::span<const FractionResult> results) {
    std::ostringstream out;
    out << "fraction,train_samples,accuracy,macro_f1,macro_recall,auprc\n";
    std::vector<std::pair<double, double>> curve;
    for (const auto& r : results) {
        out << format_double(r.fraction) << ',';
        if (!r.result) {
            out << "skipped,,,,\n";
            continue;
        }
        const ProbeResult& p = *r.result;
        out << p.train_samples << ',' << format_double(p.accuracy) << ',' << format_double(p.macro_f1) << ','
            << format_double(p.macro_recall) << ',' << format_double(p.auprc) << '\n';
        curve.emplace_back(r.fraction, p.accuracy);
    }
    std::sort(curve.begin(), curve.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    bool monotone = true;
    for (std::size_t i = 1; i < curve.size(); ++i) monotone = monotone && curve[i].second <= curve[i - 1].second;
    out << "# accuracy non-increasing as labels shrink: " << (monotone ? "yes" : "no") << '\n';
    return out.str();
}

std::string format_probe_result(const ProbeResult& r) {
    std::ostringstream out;
    out << "accuracy = " << format_double(r.accuracy) << '\n'
        << "macro_f1 = " << format_double(r.macro_f1) << '\n'
        << "macro_recall = " << format_double(r.macro_recall) << '\n'
        << "auprc = " << format_double(r.auprc) << '\n'
        << "test_samples = " << r.samples << '\n'
        << "train_samples = " << r.train_samples << '\n'
        << "selected_epoch = " << r.selected_epoch << '\n'
        << "validation_accuracy = " << format_double(r.validation_accuracy) << '\n'
        << "class,support,precision,recall,f1,average_precision\n";
    for (const auto& m : r.per_class) {
        out << m.label << ',' << m.support << ',';
        if (!m.defined) {
            out << "undefined,undefined,undefined,undefined\n";
            continue;
        }
        out << format_double(m.precision) << ',' << format_double(m.recall) << ',' << format_double(m.f1) << ','
            << format_double(m.average_precision) << '\n';
    }
    return out.str();
}

const char* policy_name(Policy p) { return p == Policy::Statiocl ? "statiocl" : "random"; }

FnpRates rates(const BatchFnp& t) {
    FnpRates r;
    if (t.nc_pairs > 0) r.hard = static_cast<double>(t.nc_same_class) / static_cast<double>(t.nc_pairs);
    if (t.tc_mass > 0.0) r.weighted = t.tc_same_class_mass / t.tc_mass;
    const double mass = static_cast<double>(t.nc_pairs) + t.tc_mass;
    if (mass > 0.0) r.combined = (static_cast<double>(t.nc_same_class) + t.tc_same_class_mass) / mass;
    return r;
}

std::vector<int> require_labels(const data::Dataset& ds) {
    std::vector<int> labels;
    labels.reserve(ds.segments.size());
    for (const auto& s : ds.segments) {
        if (!s.label) throw ConfigError("segment " + std::to_string(s.id) + " has no label");
        labels.push_back(*s.label);
    }
    return labels;
}

FnpReport fnp_audit(const data::Dataset& ds, std::span<const int> states, const contrast::ContrastConfig& config,
                    std::span<const std::vector<std::size_t>> schedule, Policy policy) {
    if (states.size() != ds.segments.size()) throw DimensionError("fnp_audit: need one state per segment");
    const std::vector<int> labels = require_labels(ds);
    contrast::ContrastConfig con = config;
    con.horizon = train::resolve_horizon(ds, config);
    FnpReport report;
    report.policy = policy;
    BatchFnp pooled;
    std::array<double, 3> sums{};
    std::array<std::size_t, 3> counts{};
    for (const auto& batch : schedule) {
        std::vector<int> s;
        std::vector<contrast::SegmentMeta> meta;
        for (std::size_t i : batch) {
            s.push_back(states[i]);
            meta.push_back({ds.segments[i].recording, ds.segments[i].index});
        }
        const auto pairs = policy == Policy::Statiocl ? contrast::build_pair_structure(s, meta, con)
                                                      : contrast::random_pair_structure(batch.size());
        BatchFnp t;
        for (std::size_t i = 0; i < batch.size(); ++i)
            for (std::size_t j = 0; j < batch.size(); ++j) {
                const bool same = labels[batch[i]] == labels[batch[j]];
                if (pairs.nc(i, j)) {
                    ++t.nc_pairs;
                    t.nc_same_class += same;
                } else if (pairs.tc(i, j)) {
                    t.tc_mass += pairs.weight(i, j);
                    if (same) t.tc_same_class_mass += pairs.weight(i, j);
                }
            }
        pooled.nc_pairs += t.nc_pairs;
        pooled.nc_same_class += t.nc_same_class;
        pooled.tc_mass += t.tc_mass;
        pooled.tc_same_class_mass += t.tc_same_class_mass;
        const FnpRates r = rates(t);
        const std::array<std::optional<double>, 3> parts{r.hard, r.weighted, r.combined};
        for (std::size_t k = 0; k < 3; ++k)
            if (parts[k]) {
                sums[k] += *parts[k];
                ++counts[k];
            }
        report.batches.push_back(t);
    }
    report.pooled = rates(pooled);
    auto avg = [&](std::size_t k) -> std::optional<double> {
        if (counts[k] == 0) return std::nullopt;
        return sums[k] / static_cast<double>(counts[k]);
    };
    report.batch_mean = {avg(0), avg(1), avg(2)};
    return report;
}

std::string format_fnp_reports(std::span<const FnpReport> reports) {
    auto show = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string("undefined"); };
    std::ostringstream out;
    out << "policy,batches,hard_fnp_rate,hard_fnp_rate_batch_mean,weighted_fnp_mass,weighted_fnp_mass_batch_mean,"
           "combined_rate,combined_rate_batch_mean\n";
    for (const auto& r : reports) {
        out << policy_name(r.policy) << ',' << r.batches.size() << ',' << show(r.pooled.hard) << ','
            << show(r.batch_mean.hard) << ',' << show(r.pooled.weighted) << ',' << show(r.batch_mean.weighted) << ','
            << show(r.pooled.combined) << ',' << show(r.batch_mean.combined) << '\n';
    }
    return out.str();
}

num::Tensor embed_dataset(const data::Dataset& ds, const encoder::EncoderConfig& config,
                          const num::ParameterSet& params, std::size_t chunk) {
    if (chunk == 0) throw ContractError("embed_dataset: chunk must be positive");
    const std::size_t n = ds.segments.size(), grid = ds.length * ds.channels;
    num::Tensor out({n, config.output_dim});
    for (std::size_t start = 0; start < n; start += chunk) {
        const std::size_t rows = std::min(chunk, n - start);
        num::Tensor batch({rows, ds.channels, ds.length});
        for (std::size_t r = 0; r < rows; ++r) {
            augment::to_channel_major(ds.segments[start + r].values, ds.length, ds.channels,
                                      batch.data().subspan(r * grid, grid));
        }
        const num::Tensor z = encoder::encode(config, params, batch);
        std::copy(z.data().begin(), z.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(start * config.output_dim));
    }
    return out;
}

void embed_export(const data::Dataset& ds, const num::Tensor& emb, const std::filesystem::path& path) {
    if (emb.rank() != 2 || emb.dim(0) != ds.segments.size()) {
        throw DimensionError("embed_export: embeddings " + num::shape_string(emb.shape()) + " do not match " +
                             std::to_string(ds.segments.size()) + " segments");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    const std::size_t dim = emb.dim(1);
    out << "id,label";
    for (std::size_t j = 0; j < dim; ++j) out << ",z" << j;
    out << '\n';
    for (std::size_t i = 0; i < ds.segments.size(); ++i) {
        const auto& s = ds.segments[i];
        out << s.id << ',' << (s.label ? std::to_string(*s.label) : std::string("-"));
        for (std::size_t j = 0; j < dim; ++j) out << ',' << format_double(emb[i * dim + j]);
        out << '\n';
    }
    if (!out) throw Error("write failed: " + path.string());
}

}  // namespace statiocl::evaluate
