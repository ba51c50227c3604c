#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "statiocl/data/synth.hpp"
#include "statiocl/error.hpp"
#include "statiocl/evaluate.hpp"
#include "statiocl/rng.hpp"
#include "statiocl/train.hpp"

using namespace statiocl;
using namespace statiocl::evaluate;
namespace fs = std::filesystem;

namespace {

const num::Tensor kNoScores = num::Tensor(num::Shape{});

struct Blobs {
    num::Tensor emb;
    std::vector<int> labels;
    std::vector<data::Split> splits;
};

// Two Gaussian clusters in `dim` dimensions; `gap` separates their means.
Blobs blobs(std::size_t n, std::size_t dim, double gap, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    Blobs b;
    b.emb = num::Tensor({n, dim});
    for (std::size_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(i % 2);
        b.labels.push_back(label);
        for (std::size_t j = 0; j < dim; ++j) b.emb.at(i, j) = noise(rng) + (label == 1 && j == 0 ? gap : 0.0);
        const std::size_t r = i % 10;
        b.splits.push_back(r < 6 ? data::Split::Train : r < 8 ? data::Split::Validation : data::Split::Test);
    }
    return b;
}

data::Dataset labelled_corpus(std::size_t segments, std::size_t classes, std::uint64_t seed) {
    data::SynthSpec spec;
    const char* gens[] = {"ar1(0.5,1)", "random_walk(1)", "sine_noise(0.05,0.3)", "trend_noise(0.02,1)"};
    for (std::size_t c = 0; c < classes; ++c) spec.classes.push_back(data::parse_process(gens[c]));
    spec.segments = segments;
    spec.length = 64;
    spec.seed = seed;
    return data::gen_synthetic(spec);
}

}  // namespace

TEST_CASE("macro F1 on the symmetric 8/2/2/8 confusion matrix") {
    std::vector<int> truth, pred;
    for (int c = 0; c < 2; ++c)
        for (int k = 0; k < 10; ++k) {
            truth.push_back(c);
            pred.push_back(k < 8 ? c : 1 - c);
        }
    const std::vector<int> classes{0, 1};
    const ProbeResult r = metrics(pred, truth, classes, kNoScores);
    CHECK(std::abs(r.macro_f1 - 0.8) <= 1e-12);
    CHECK(std::abs(r.accuracy - 0.8) <= 1e-12);
    CHECK(std::abs(r.macro_recall - 0.8) <= 1e-12);
    CHECK(std::isnan(r.auprc));
}

TEST_CASE("three-class fixture matches hand computation") {
    // Confusion rows (truth) x columns (prediction): [3 1 0; 1 2 1; 0 0 2].
    const std::vector<int> truth{0, 0, 0, 0, 1, 1, 1, 1, 2, 2};
    const std::vector<int> pred{0, 0, 0, 1, 0, 1, 1, 2, 2, 2};
    const std::vector<int> classes{0, 1, 2};
    const ProbeResult r = metrics(pred, truth, classes, kNoScores);
    CHECK(std::abs(r.accuracy - 0.7) <= 1e-12);
    CHECK(std::abs(r.per_class[0].precision - 0.75) <= 1e-12);
    CHECK(std::abs(r.per_class[1].precision - 2.0 / 3.0) <= 1e-12);
    CHECK(std::abs(r.per_class[2].precision - 2.0 / 3.0) <= 1e-12);
    CHECK(std::abs(r.per_class[1].recall - 0.5) <= 1e-12);
    CHECK(std::abs(r.per_class[2].recall - 1.0) <= 1e-12);
    CHECK(std::abs(r.per_class[1].f1 - 4.0 / 7.0) <= 1e-12);
    CHECK(std::abs(r.per_class[2].f1 - 0.8) <= 1e-12);
    CHECK(std::abs(r.macro_f1 - (0.75 + 4.0 / 7.0 + 0.8) / 3.0) <= 1e-12);
    CHECK(std::abs(r.macro_recall - 0.75) <= 1e-12);
    CHECK(r.per_class[0].support == 4);
}

TEST_CASE("perfect predictions and rankings") {
    const std::vector<int> labels{0, 1, 1, 0, 2};
    const std::vector<int> classes{0, 1, 2};
    num::Tensor scores({5, 3});
    for (std::size_t i = 0; i < 5; ++i) scores.at(i, static_cast<std::size_t>(labels[i])) = 1.0;
    const ProbeResult r = metrics(labels, labels, classes, scores);
    CHECK(r.accuracy == 1.0);
    CHECK(r.macro_f1 == 1.0);
    CHECK(r.macro_recall == 1.0);
    CHECK(r.auprc == 1.0);
}

TEST_CASE("average precision steps over distinct thresholds") {
    const std::vector<double> s{0.9, 0.8, 0.7, 0.6};
    const std::vector<std::uint8_t> p{1, 0, 1, 0};
    CHECK(std::abs(average_precision(s, p) - (0.5 + 0.5 * 2.0 / 3.0)) <= 1e-12);
    const std::vector<double> tied{0.5, 0.5};
    const std::vector<std::uint8_t> half{1, 0};
    CHECK(std::abs(average_precision(tied, half) - 0.5) <= 1e-12);
    const std::vector<std::uint8_t> none{0, 0};
    CHECK(average_precision(tied, none) == 0.0);
}

TEST_CASE("metrics are invariant to relabeling classes") {
    Rng rng(4);
    std::vector<int> truth, pred;
    num::Tensor scores({60, 3});
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t i = 0; i < 60; ++i) {
        truth.push_back(static_cast<int>(rng() % 3));
        pred.push_back(static_cast<int>(rng() % 3));
        for (std::size_t k = 0; k < 3; ++k) scores.at(i, k) = u(rng);
    }
    const std::map<int, int> relabel{{0, 7}, {1, 3}, {2, 5}};
    std::vector<int> truth2, pred2;
    for (std::size_t i = 0; i < 60; ++i) {
        truth2.push_back(relabel.at(truth[i]));
        pred2.push_back(relabel.at(pred[i]));
    }
    const std::vector<int> classes{0, 1, 2};
    const std::vector<int> classes2{7, 3, 5};
    const ProbeResult a = metrics(pred, truth, classes, scores);
    const ProbeResult b = metrics(pred2, truth2, classes2, scores);
    CHECK(a.accuracy == b.accuracy);
    CHECK(std::abs(a.macro_f1 - b.macro_f1) <= 1e-15);
    CHECK(std::abs(a.macro_recall - b.macro_recall) <= 1e-15);
    CHECK(std::abs(a.auprc - b.auprc) <= 1e-15);
}

TEST_CASE("classes without support are undefined and excluded") {
    const std::vector<int> truth{0, 0, 1, 1};
    const std::vector<int> pred{0, 2, 1, 1};
    const std::vector<int> classes{0, 1, 2};
    const ProbeResult r = metrics(pred, truth, classes, kNoScores);
    CHECK_FALSE(r.per_class[2].defined);
    CHECK(std::abs(r.macro_recall - 0.75) <= 1e-12);
    CHECK(format_probe_result(r).find("2,0,undefined") != std::string::npos);
    const std::vector<int> empty;
    CHECK_THROWS_AS(metrics(empty, empty, classes, kNoScores), ContractError);
}

TEST_CASE("probe separates separable embeddings") {
    const Blobs b = blobs(200, 4, 20.0, 1);
    const ProbeResult r = linear_probe(b.emb, b.labels, b.splits, ProbeConfig{}, 3);
    CHECK(r.accuracy == 1.0);
    CHECK(r.macro_f1 == 1.0);
    CHECK(r.train_samples == 120);
    CHECK(r.samples == 40);
    CHECK(r.selected_epoch >= 1);
    CHECK(r.validation_accuracy == 1.0);
}

TEST_CASE("probe on shuffled labels is at chance") {
    double total = 0.0;
    const int reps = 10;
    for (int rep = 0; rep < reps; ++rep) {
        Blobs b = blobs(2000, 8, 0.0, 100 + rep);
        Rng rng(200 + rep);
        std::shuffle(b.labels.begin(), b.labels.end(), rng);
        total += linear_probe(b.emb, b.labels, b.splits, ProbeConfig{}, rep).accuracy;
    }
    CHECK(std::abs(total / reps - 0.5) <= 0.05);
}

TEST_CASE("probe needs two training classes") {
    Blobs b = blobs(50, 2, 1.0, 2);
    std::fill(b.labels.begin(), b.labels.end(), 1);
    CHECK_THROWS_AS(linear_probe(b.emb, b.labels, b.splits, ProbeConfig{}, 0), ConfigError);
    ProbeConfig bad;
    bad.epochs = 0;
    CHECK_THROWS_AS(validate(bad), ConfigError);
}

TEST_CASE("stratified subsample sizes") {
    std::vector<int> labels;
    for (int i = 0; i < 103; ++i) labels.push_back(i % 3 == 0 ? 0 : 1);
    std::vector<std::size_t> pool(103);
    std::iota(pool.begin(), pool.end(), 0);
    for (double f : {1.0, 0.75, 0.5, 0.25, 0.1}) {
        const auto sub = stratified_subsample(labels, pool, f, 9);
        std::map<int, std::size_t> got;
        for (std::size_t i : sub) ++got[labels[i]];
        CHECK(got[0] == static_cast<std::size_t>(std::llround(f * 35)));
        CHECK(got[1] == static_cast<std::size_t>(std::llround(f * 68)));
        CHECK(std::is_sorted(sub.begin(), sub.end()));
        CHECK(stratified_subsample(labels, pool, f, 9) == sub);
    }
    CHECK(stratified_subsample(labels, pool, 1.0, 1) == pool);
    CHECK_THROWS_AS(stratified_subsample(labels, pool, 0.01, 9), ConfigError);
    CHECK_THROWS_AS(stratified_subsample(labels, pool, 1.5, 9), ConfigError);
}

TEST_CASE("label-fraction protocol") {
    const Blobs b = blobs(300, 4, 3.0, 5);
    const std::vector<double> fractions{1.0, 0.5, 0.1, 0.001};
    const auto curve = label_fraction_protocol(b.emb, b.labels, b.splits, fractions, ProbeConfig{}, 7);
    REQUIRE(curve.size() == 4);
    const ProbeResult full = linear_probe(b.emb, b.labels, b.splits, ProbeConfig{}, 7);
    REQUIRE(curve[0].result.has_value());
    CHECK(curve[0].result->accuracy == full.accuracy);
    CHECK(curve[0].result->macro_f1 == full.macro_f1);
    CHECK(curve[1].result->train_samples == 90);
    CHECK(curve[2].result->train_samples == 18);
    CHECK_FALSE(curve[3].result.has_value());
    const std::string report = format_fraction_report(curve);
    CHECK(report.find("0.001,skipped") != std::string::npos);
    CHECK(report.find("# accuracy non-increasing as labels shrink: ") != std::string::npos);
}

TEST_CASE("fnp rates and empty denominators") {
    const FnpRates none = rates(BatchFnp{});
    CHECK_FALSE(none.hard.has_value());
    CHECK_FALSE(none.weighted.has_value());
    CHECK_FALSE(none.combined.has_value());
    const FnpRates r = rates(BatchFnp{10, 2, 4.0, 3.0});
    CHECK(*r.hard == 0.2);
    CHECK(*r.weighted == 0.75);
    CHECK(std::abs(*r.combined - 5.0 / 14.0) <= 1e-15);
    CHECK(*r.combined >= std::min(*r.hard, *r.weighted));
    CHECK(*r.combined <= std::max(*r.hard, *r.weighted));
}

TEST_CASE("hard fnp rate is zero when class equals state") {
    const data::Dataset ds = labelled_corpus(400, 2, 1);
    const std::vector<int> states = require_labels(ds);
    const auto pool = ds.indices(data::Split::Train);
    const auto schedule = train::batch_schedule(pool, 32, 4, 0, true);
    contrast::ContrastConfig con;
    const FnpReport s = fnp_audit(ds, states, con, schedule, Policy::Statiocl);
    REQUIRE(s.pooled.hard.has_value());
    CHECK(*s.pooled.hard == 0.0);
    CHECK(*s.batch_mean.hard == 0.0);
    CHECK(*s.pooled.weighted == 1.0);
    const FnpReport r = fnp_audit(ds, states, con, schedule, Policy::Random);
    CHECK(*r.pooled.combined > *s.pooled.hard);
    CHECK_FALSE(r.pooled.weighted.has_value());
    const std::vector<FnpReport> both{s, r};
    const std::string text = format_fnp_reports(both);
    CHECK(text.find("random,") != std::string::npos);
    CHECK(text.find("statiocl,") != std::string::npos);
}

TEST_CASE("random baseline matches the combinatorial expectation") {
    for (std::size_t classes : {2u, 4u}) {
        const data::Dataset ds = labelled_corpus(2000, classes, 2);
        const auto labels = require_labels(ds);
        std::vector<std::size_t> all(ds.segments.size());
        std::iota(all.begin(), all.end(), 0);
        std::vector<std::vector<std::size_t>> schedule;
        const std::size_t n = 64;
        for (std::uint64_t b = 0; b < 100; ++b) schedule.push_back(train::batch_schedule(all, n, 5, b, true)[0]);
        const FnpReport r = fnp_audit(ds, labels, contrast::ContrastConfig{}, schedule, Policy::Random);
        const double expected = (static_cast<double>(n) / classes - 1.0) / (n - 1.0);
        CHECK(std::abs(*r.batch_mean.combined - expected) <= 0.02);
        CHECK(std::abs(*r.pooled.hard - expected) <= 0.02);
    }
}

TEST_CASE("embedding export") {
    const data::Dataset ds = labelled_corpus(100, 2, 3);
    encoder::EncoderConfig enc;
    enc.widths = {4, 4, 4};
    enc.output_dim = 3;
    const auto params = encoder::encoder_init(enc, 1);
    const num::Tensor emb = embed_dataset(ds, enc, params, 7);
    CHECK(emb.shape() == num::Shape{100, 3});
    const fs::path dir = fs::temp_directory_path() / "statiocl_test_embed";
    fs::create_directories(dir);
    embed_export(ds, emb, dir / "a.csv");
    embed_export(ds, embed_dataset(ds, enc, params), dir / "b.csv");
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p);
        std::ostringstream s;
        s << in.rdbuf();
        return s.str();
    };
    const std::string text = slurp(dir / "a.csv");
    CHECK(text == slurp(dir / "b.csv"));

    // Compare parsed values with a direct encode of each segment.
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    CHECK(line == "id,label,z0,z1,z2");
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        std::vector<std::string> f;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
        REQUIRE(f.size() == 5);
        const std::size_t id = std::stoul(f[0]);
        CHECK(id == rows);
        CHECK(std::stoi(f[1]) == *ds.segments[id].label);
        num::Tensor one({1, 1, ds.length}, ds.segments[id].values);
        const num::Tensor z = encoder::encode(enc, params, one);
        for (std::size_t k = 0; k < 3; ++k) CHECK(std::strtod(f[2 + k].c_str(), nullptr) == z[k]);
        ++rows;
    }
    CHECK(rows == 100);
    CHECK_THROWS_AS(embed_export(ds, num::Tensor({3, 3}), dir / "c.csv"), DimensionError);
}

TEST_CASE("labels are required for the audit") {
    data::Dataset ds = labelled_corpus(100, 2, 4);
    ds.segments[3].label.reset();
    CHECK_THROWS_AS(require_labels(ds), ConfigError);
}
