#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "statiocl/data/dataset.hpp"
#include "statiocl/data/synth.hpp"
#include "statiocl/error.hpp"
#include "statiocl/stationarity/adf.hpp"

using namespace statiocl;
using namespace statiocl::data;
namespace fs = std::filesystem;

namespace {

SynthSpec two_class(std::size_t segments, std::uint64_t seed) {
    SynthSpec s;
    s.classes = {parse_process("ar1(0.5,1)"), parse_process("random_walk(1)")};
    s.segments = segments;
    s.seed = seed;
    return s;
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("statiocl_test_data_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string read_text(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write_text(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

}  // namespace

TEST_CASE("process specs parse and reject bad parameters") {
    CHECK(parse_process("ar1(0.5,1)").stationary());
    CHECK_FALSE(parse_process("random_walk(1)").stationary());
    CHECK(parse_process("sine_noise(0.05,0.3)").stationary());
    CHECK_FALSE(parse_process("trend_noise(0.02,1)").stationary());
    CHECK(parse_process(" ar1( 0.5 , 1 ) ").to_string() == "ar1(0.5,1)");
    CHECK_THROWS_AS(parse_process("ar1(1.0,1)"), ConfigError);
    CHECK_THROWS_AS(parse_process("ar1(0.5)"), ConfigError);
    CHECK_THROWS_AS(parse_process("random_walk(-1)"), ConfigError);
    CHECK_THROWS_AS(parse_process("garch(1,1)"), ConfigError);
}

TEST_CASE("random walk variance grows linearly in time") {
    const ProcessSpec walk = parse_process("random_walk(1.5)");
    const std::size_t walks = 10000, steps = 60;
    std::vector<double> sum(steps, 0.0), sq(steps, 0.0);
    Rng rng(17);
    for (std::size_t w = 0; w < walks; ++w) {
        ProcessState state;
        const auto y = simulate_process(walk, steps, state, rng);
        for (std::size_t t = 0; t < steps; ++t) {
            sum[t] += y[t];
            sq[t] += y[t] * y[t];
        }
    }
    for (std::size_t t : {10u, 30u, 60u}) {
        const double m = sum[t - 1] / walks;
        const double var = sq[t - 1] / walks - m * m;
        CHECK(var == doctest::Approx(t * 2.25).epsilon(0.05));
    }
}

TEST_CASE("consecutive draws continue one path") {
    const ProcessSpec walk = parse_process("random_walk(1)");
    Rng a(3), b(3);
    ProcessState sa, sb;
    const auto whole = simulate_process(walk, 20, sa, a);
    auto first = simulate_process(walk, 12, sb, b);
    const auto rest = simulate_process(walk, 8, sb, b);
    first.insert(first.end(), rest.begin(), rest.end());
    CHECK(whole == first);
}

TEST_CASE("two-class corpus has exact class counts and labelled recordings") {
    const Dataset ds = gen_synthetic(two_class(2000, 1));
    CHECK_NOTHROW(validate(ds));
    CHECK(ds.segments.size() == 2000);
    CHECK(ds.length == 179);
    std::map<int, std::size_t> counts;
    for (const auto& s : ds.segments) {
        REQUIRE(s.label.has_value());
        ++counts[*s.label];
    }
    CHECK(counts[0] == 1000);
    CHECK(counts[1] == 1000);
    CHECK(ds.recordings.size() == 100);
    CHECK(ds.uniform_recording_size() == 20);
    CHECK(ds.normalization.has_value());
    CHECK_FALSE(ds.normalized);
    CHECK(gen_synthetic(two_class(2000, 1)).segments == ds.segments);
}

TEST_CASE("recording-level split at 60/20/20") {
    Dataset ds = gen_synthetic(two_class(2000, 2));
    for (bool stratify : {false, true}) {
        assign_splits(ds, {0.6, 0.2, 0.2}, 5, stratify);
        CHECK_NOTHROW(validate(ds));
        std::array<std::size_t, 3> recs{};
        for (const auto& r : ds.recordings) {
            const Split s = ds.split[r.first];
            for (std::size_t k = 0; k < r.count; ++k) CHECK(ds.split[r.first + k] == s);
            ++recs[static_cast<std::size_t>(s)];
        }
        CHECK(recs[0] == 60);
        CHECK(recs[1] == 20);
        CHECK(recs[2] == 20);
        const auto before = ds.split;
        assign_splits(ds, {0.6, 0.2, 0.2}, 5, stratify);
        CHECK(ds.split == before);
    }
    assign_splits(ds, {1.0, 0.0, 0.0}, 5, false);
    CHECK(ds.indices(Split::Train).size() == 2000);
    CHECK_THROWS_AS(assign_splits(ds, {0.5, 0.2, 0.2}, 5, false), ConfigError);
}

TEST_CASE("too few recordings for the requested splits") {
    SynthSpec s = two_class(40, 3);
    s.segments_per_recording = 20;
    s.split = {1.0, 0.0, 0.0};
    Dataset ds = gen_synthetic(s);
    CHECK(ds.recordings.size() == 2);
    CHECK_THROWS_AS(assign_splits(ds, {0.6, 0.2, 0.2}, 1, false), ConfigError);
}

TEST_CASE("dataset round trip is bitwise lossless") {
    SynthSpec s = two_class(200, 4);
    s.channels = 2;
    const Dataset ds = gen_synthetic(s);
    const fs::path dir = scratch("roundtrip");
    const fs::path manifest = write_dataset(ds, dir);
    const Dataset back = load_dataset(manifest, LoadOptions{false});
    CHECK(back.segments == ds.segments);
    CHECK(back.recordings == ds.recordings);
    CHECK(back.split == ds.split);
    CHECK(back.normalization == ds.normalization);
    CHECK(dataset_hash(back) == dataset_hash(ds));
    write_dataset(back, dir / "again");
    CHECK(read_text(dir / "again" / "values.csv") == read_text(dir / "values.csv"));
}

TEST_CASE("loading normalizes with the stored training statistics") {
    SynthSpec s = two_class(400, 5);
    s.channels = 3;
    const Dataset ds = gen_synthetic(s);
    const fs::path manifest = write_dataset(ds, scratch("normalize"));
    const Dataset z = load_dataset(manifest);
    CHECK(z.normalized);
    const auto train = z.indices(Split::Train);
    for (std::size_t v = 0; v < 3; ++v) {
        double sum = 0.0, sq = 0.0;
        std::size_t n = 0;
        for (std::size_t i : train)
            for (std::size_t t = 0; t < z.length; ++t) {
                const double x = z.segments[i].values[t * 3 + v];
                sum += x;
                sq += x * x;
                ++n;
            }
        const double mean = sum / n;
        CHECK(std::abs(mean) < 1e-9);
        CHECK(std::abs(std::sqrt(sq / n - mean * mean) - 1.0) < 1e-9);
    }
}

TEST_CASE("manifest with overlapping splits is rejected") {
    const Dataset ds = gen_synthetic(two_class(100, 6));
    const fs::path dir = scratch("overlap");
    const fs::path manifest = write_dataset(ds, dir);
    std::string text = read_text(manifest);
    const auto at = text.find("train = ");
    REQUIRE(at != std::string::npos);
    text.insert(at + 8, "0:100,");
    write_text(manifest, text);
    try {
        load_dataset(manifest);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("appears in both") != std::string::npos);
    }
}

TEST_CASE("inconsistent value files name the file and line") {
    const Dataset ds = gen_synthetic(two_class(100, 7));
    const fs::path dir = scratch("badrow");
    const fs::path manifest = write_dataset(ds, dir);
    std::string values = read_text(dir / "values.csv");
    const auto line3 = values.find('\n', values.find('\n', values.find('\n') + 1) + 1);
    values.insert(line3, ",9.5");
    write_text(dir / "values.csv", values);
    try {
        load_dataset(manifest);
        FAIL("expected LoadError");
    } catch (const LoadError& e) {
        CHECK(std::string(e.what()).find("values.csv:3") != std::string::npos);
    }
    CHECK_THROWS_AS(load_dataset(dir / "missing.ini"), ConfigError);
}

TEST_CASE("random-walk segments are assessed non-stationary") {
    const Dataset ds = gen_synthetic(two_class(400, 8));
    const auto a = stationarity::assess_dataset(ds, 0.01);
    std::size_t walks = 0, flagged = 0;
    for (std::size_t i = 0; i < ds.segments.size(); ++i) {
        if (*ds.segments[i].label != 1) continue;
        ++walks;
        flagged += a.labels[i].state == 1 ? 1 : 0;
    }
    REQUIRE(walks == 200);
    CHECK(static_cast<double>(flagged) >= 0.95 * walks);
}
