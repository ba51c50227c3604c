#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "gradcheck.hpp"
#include "statiocl/contrast.hpp"
#include "statiocl/error.hpp"
#include "statiocl/rng.hpp"

using namespace statiocl;
using namespace statiocl::contrast;
using statiocl::testing::check_gradient;

namespace {

num::Tensor random_matrix(std::size_t r, std::size_t c, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    Rng rng(seed);
    std::uniform_real_distribution<double> d(lo, hi);
    num::Tensor t({r, c});
    for (double& v : t.data()) v = d(rng);
    return t;
}

struct Batch {
    std::vector<int> states;
    std::vector<SegmentMeta> meta;
};

Batch random_batch(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    Batch b;
    for (std::size_t i = 0; i < n; ++i) {
        b.states.push_back(static_cast<int>(rng() % 2));
        b.meta.push_back({rng() % 3, rng() % 20});
    }
    return b;
}

double eval(num::Var v) { return v.value().item(); }

ContrastConfig unit_tau() {
    ContrastConfig c;
    c.tau = 1.0;
    c.horizon = 8;
    return c;
}

}  // namespace

TEST_CASE("Beta function and density values") {
    CHECK(std::abs(beta_function(2.0, 8.0) - 1.0 / 72.0) <= 1e-12);
    CHECK(beta_mode(2.0, 8.0) == doctest::Approx(0.125));
    const double at_mode = 72.0 * 0.125 * std::pow(0.875, 7);
    CHECK(beta_pdf(0.125, 2.0, 8.0) == doctest::Approx(at_mode).epsilon(1e-12));
    CHECK(at_mode == doctest::Approx(3.5344).epsilon(1e-4));
    CHECK(std::abs(beta_weight(0.125, 2.0, 8.0) - 1.0) <= 1e-12);
    CHECK(beta_weight(0.0, 2.0, 8.0) == 0.0);
    CHECK(beta_weight(1.0, 2.0, 8.0) == 0.0);
    CHECK(beta_weight(0.3, 2.0, 8.0) ==
          doctest::Approx(beta_pdf(0.3, 2.0, 8.0) / beta_pdf(0.125, 2.0, 8.0)).epsilon(1e-12));
}

TEST_CASE("Beta weight is unimodal with maximum 1") {
    for (double b : {8.0, 16.0, 24.0, 32.0}) {
        const double mode = beta_mode(2.0, b);
        double prev = beta_weight(0.0, 2.0, b);
        for (int i = 1; i <= 1000; ++i) {
            const double x = i / 1000.0;
            const double w = beta_weight(x, 2.0, b);
            CHECK(w <= 1.0 + 1e-15);
            if (x <= mode) {
                CHECK(w > prev);
            } else if (x - 1e-3 >= mode) {
                CHECK(w < prev);
            }
            prev = w;
        }
    }
}

TEST_CASE("Beta weight clamps out-of-range distances and needs shapes above 1") {
    CHECK(beta_weight(-0.5, 2.0, 8.0) == 0.0);
    CHECK(beta_weight(1.5, 2.0, 8.0) == 0.0);
    CHECK_THROWS_AS(beta_weight(0.5, 1.0, 8.0), ContractError);
    CHECK_THROWS_AS(beta_mode(2.0, 0.5), ContractError);
}

TEST_CASE("config validation") {
    ContrastConfig c;
    CHECK_NOTHROW(validate(c));
    c.tau = 0.0;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = ContrastConfig{};
    c.lambda = 1.5;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = ContrastConfig{};
    c.alpha = 1.0;
    CHECK_THROWS_AS(validate(c), ConfigError);
}

TEST_CASE("pair structure degenerate cases") {
    const ContrastConfig c = unit_tau();
    const std::vector<SegmentMeta> meta{{0, 0}, {0, 1}, {0, 2}};
    const std::vector<int> same{1, 1, 1};
    const auto all_tc = build_pair_structure(same, meta, c);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            CHECK_FALSE(all_tc.nc(i, j));
            CHECK(all_tc.tc(i, j) == (i != j));
        }
    const std::vector<int> alt{0, 1};
    const std::vector<SegmentMeta> two{{0, 0}, {0, 1}};
    const auto all_nc = build_pair_structure(alt, two, c);
    CHECK(all_nc.nc(0, 1));
    CHECK(all_nc.nc(1, 0));
    CHECK_FALSE(all_nc.tc(0, 1));
    CHECK(all_nc.weight(0, 1) == 1.0);
    CHECK_THROWS_AS(build_pair_structure(std::vector<int>{0}, std::vector<SegmentMeta>{{0, 0}}, c), ContractError);
}

TEST_CASE("temporal weights follow the Beta weight of the normalized gap") {
    ContrastConfig c = unit_tau();
    c.horizon = 16;
    const std::vector<int> states{0, 0, 0, 0};
    const std::vector<SegmentMeta> meta{{0, 0}, {0, 2}, {0, 10}, {1, 2}};
    const auto p = build_pair_structure(states, meta, c);
    CHECK(std::abs(p.weight(0, 1) - 1.0) <= 1e-12);  // gap = horizon / 8 is the mode
    CHECK(p.weight(0, 2) == doctest::Approx(beta_weight(10.0 / 16.0, 2.0, 8.0)).epsilon(1e-14));
    CHECK(p.weight(1, 3) == 1.0);  // different recording
    c.horizon = 4;
    const auto far = build_pair_structure(states, meta, c);
    CHECK(far.weight(0, 2) == 0.0);  // clamped to 1
}

TEST_CASE("pair structure partitions off-diagonal pairs with symmetric weights") {
    const ContrastConfig c = unit_tau();
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Batch b = random_batch(12, seed);
        const auto p = build_pair_structure(b.states, b.meta, c);
        for (std::size_t i = 0; i < 12; ++i)
            for (std::size_t j = 0; j < 12; ++j) {
                if (i == j) {
                    CHECK_FALSE(p.nc(i, j));
                    CHECK_FALSE(p.tc(i, j));
                    continue;
                }
                CHECK(p.nc(i, j) != p.tc(i, j));
                CHECK(p.weight(i, j) == p.weight(j, i));
                CHECK(p.weight(i, j) >= 0.0);
                CHECK(p.weight(i, j) <= 1.0 + 1e-15);
            }
    }
}

TEST_CASE("random baseline treats every other sample as a negative") {
    const auto p = random_pair_structure(4);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
            CHECK(p.nc(i, j) == (i != j));
            CHECK_FALSE(p.tc(i, j));
        }
}

TEST_CASE("B=2 hand-computed loss values") {
    const ContrastConfig c = unit_tau();
    num::Tape tape;
    const num::Var sim = tape.constant(num::Tensor({2, 2}, {1.0, 0.0, 0.0, 1.0}));
    const std::vector<SegmentMeta> meta{{0, 0}, {0, 2}};

    const auto nc_pairs = build_pair_structure(std::vector<int>{0, 1}, meta, c);
    const double e = std::exp(1.0);
    CHECK(std::abs(eval(nc_loss_from_similarity(sim, nc_pairs, c)) + std::log(e / (e + 1.0))) <= 1e-10);
    CHECK(std::abs(-std::log(e / (e + 1.0)) - 0.3133) <= 1e-4);

    const auto tc_pairs = build_pair_structure(std::vector<int>{1, 1}, meta, c);
    const double w = beta_weight(2.0 / 8.0, 2.0, 8.0);
    CHECK(tc_pairs.weight(0, 1) == w);
    CHECK(std::abs(eval(tc_loss_from_similarity(sim, tc_pairs, c)) + std::log(e / (e + w))) <= 1e-10);

    // No negatives for this term: -log(p / p) = 0.
    CHECK(eval(tc_loss_from_similarity(sim, nc_pairs, c)) == 0.0);
    CHECK(eval(nc_loss_from_similarity(sim, tc_pairs, c)) == 0.0);
}

TEST_CASE("literal mode rejects an empty denominator") {
    ContrastConfig c = unit_tau();
    c.literal_equation_mode = true;
    num::Tape tape;
    const num::Var sim = tape.constant(num::Tensor({2, 2}, {1.0, 0.0, 0.0, 1.0}));
    const auto nc_pairs = build_pair_structure(std::vector<int>{0, 1}, std::vector<SegmentMeta>{{0, 0}, {0, 1}}, c);
    CHECK_THROWS_AS(tc_loss_from_similarity(sim, nc_pairs, c), ContractError);
    // With negatives present the literal form is -log(e / 1) = -1 per anchor.
    CHECK(eval(nc_loss_from_similarity(sim, nc_pairs, c)) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("all temporal weights zero reduce the tc loss to zero") {
    ContrastConfig c = unit_tau();
    c.horizon = 2;
    num::Tape tape;
    const num::Var sim = tape.constant(random_matrix(3, 3, 4));
    const std::vector<SegmentMeta> meta{{0, 0}, {0, 5}, {0, 10}};
    const auto p = build_pair_structure(std::vector<int>{0, 0, 0}, meta, c);
    CHECK(std::abs(eval(tc_loss_from_similarity(sim, p, c))) <= 1e-15);
}

TEST_CASE("unit weights reduce the tc loss to the unweighted form") {
    const ContrastConfig c = unit_tau();
    num::Tape tape;
    const num::Var sim = tape.constant(random_matrix(5, 5, 6));
    PairStructure tc;
    tc.batch = 5;
    tc.nc_mask.assign(25, 0);
    tc.tc_mask.assign(25, 0);
    tc.weights.assign(25, 0.0);
    const std::vector<std::pair<int, int>> support{{0, 1}, {1, 0}, {2, 3}, {3, 2}, {0, 4}, {4, 0}, {1, 2}, {2, 1}};
    for (auto [i, j] : support) {
        tc.tc_mask[i * 5 + j] = 1;
        tc.weights[i * 5 + j] = 1.0;
    }
    PairStructure nc = tc;
    std::swap(nc.nc_mask, nc.tc_mask);
    CHECK(std::abs(eval(tc_loss_from_similarity(sim, tc, c)) - eval(nc_loss_from_similarity(sim, nc, c))) <= 1e-14);
}

TEST_CASE("mixing endpoints and midpoint") {
    ContrastConfig c = unit_tau();
    const Batch b = random_batch(8, 3);
    const auto p = build_pair_structure(b.states, b.meta, c);
    num::Tape tape;
    const num::Var sim = tape.constant(random_matrix(8, 8, 7));
    c.lambda = 1.0;
    auto l = combined_loss_from_similarity(sim, p, c);
    CHECK(eval(l.total) == eval(l.nc));
    c.lambda = 0.0;
    l = combined_loss_from_similarity(sim, p, c);
    CHECK(eval(l.total) == eval(l.tc));
    c.lambda = 0.5;
    l = combined_loss_from_similarity(sim, p, c);
    CHECK(std::abs(eval(l.total) - 0.5 * (eval(l.nc) + eval(l.tc))) <= 1e-12);
}

TEST_CASE("losses are non-negative in default mode") {
    ContrastConfig c;
    c.horizon = 10;
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const Batch b = random_batch(10, seed);
        const auto p = build_pair_structure(b.states, b.meta, c);
        num::Tape tape;
        const auto l = combined_loss(tape.constant(random_matrix(10, 6, seed)),
                                     tape.constant(random_matrix(10, 6, seed + 100)), p, c);
        CHECK(eval(l.nc) >= 0.0);
        CHECK(eval(l.tc) >= 0.0);
        CHECK(eval(l.total) >= 0.0);
    }
}

TEST_CASE("temperature rescaling leaves the loss unchanged") {
    ContrastConfig c;
    c.horizon = 10;
    const Batch b = random_batch(9, 11);
    const auto p = build_pair_structure(b.states, b.meta, c);
    const num::Tensor s = random_matrix(9, 9, 12);
    for (double factor : {0.5, 2.0, 3.0}) {
        ContrastConfig scaled = c;
        scaled.tau = c.tau * factor;
        num::Tape tape;
        const num::Var base = tape.constant(s);
        const num::Var stretched = num::scale(base, factor);
        const auto a = combined_loss_from_similarity(base, p, c);
        const auto z = combined_loss_from_similarity(stretched, p, scaled);
        CHECK(std::abs(eval(a.nc) - eval(z.nc)) <= 1e-12);
        CHECK(std::abs(eval(a.tc) - eval(z.tc)) <= 1e-12);
        CHECK(std::abs(eval(a.total) - eval(z.total)) <= 1e-12);
    }
}

TEST_CASE("permuting the batch leaves the loss unchanged") {
    ContrastConfig c;
    c.horizon = 10;
    const std::size_t n = 10;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Batch b = random_batch(n, seed + 40);
        const num::Tensor za = random_matrix(n, 4, seed + 50);
        const num::Tensor zb = random_matrix(n, 4, seed + 60);
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        Rng rng(seed);
        std::shuffle(perm.begin(), perm.end(), rng);
        Batch pb;
        num::Tensor pa({n, 4}), pz({n, 4});
        for (std::size_t i = 0; i < n; ++i) {
            pb.states.push_back(b.states[perm[i]]);
            pb.meta.push_back(b.meta[perm[i]]);
            for (std::size_t k = 0; k < 4; ++k) {
                pa.at(i, k) = za.at(perm[i], k);
                pz.at(i, k) = zb.at(perm[i], k);
            }
        }
        num::Tape tape;
        const auto l = combined_loss(tape.constant(za), tape.constant(zb),
                                     build_pair_structure(b.states, b.meta, c), c);
        const auto lp = combined_loss(tape.constant(pa), tape.constant(pz),
                                      build_pair_structure(pb.states, pb.meta, c), c);
        CHECK(std::abs(eval(l.total) - eval(lp.total)) <= 1e-10);
        CHECK(std::abs(eval(l.nc) - eval(lp.nc)) <= 1e-10);
        CHECK(std::abs(eval(l.tc) - eval(lp.tc)) <= 1e-10);
    }
}

TEST_CASE("combined loss gradient matches finite differences") {
    ContrastConfig c;
    c.horizon = 4;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Batch b = random_batch(4, seed + 70);
        const auto p = build_pair_structure(b.states, b.meta, c);
        const auto fn = [&](num::Tape&, std::span<const num::Var> in) {
            return combined_loss(in[0], in[1], p, c).total;
        };
        const auto r = check_gradient(fn, {random_matrix(4, 5, seed + 80), random_matrix(4, 5, seed + 90)});
        CHECK(r.max_rel_error <= 1e-3);
    }
}

TEST_CASE("similarity shape must match the pair structure") {
    const ContrastConfig c = unit_tau();
    num::Tape tape;
    const auto p = random_pair_structure(3);
    CHECK_THROWS_AS(nc_loss_from_similarity(tape.constant(num::Tensor({2, 2})), p, c), DimensionError);
}
