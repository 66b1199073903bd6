#include <doctest.h>

#include <cmath>
#include <random>

#include "conformal/weighted.hpp"
#include "oracles.hpp"

using namespace conformal;

namespace {

LabeledSample point(double x, double y) { return {{x}, std::nullopt, Outcome::real(y)}; }

double log_normal_pdf(double x) { return -0.5 * x * x; }

// Calibration features from P = N(0,1), the test feature from Q with dQ/dP = exp(beta x).
JointLaw covariate_shift_law(double beta) {
    return {[beta](std::span<const LabeledSample> z) {
        double lf = 0.0;
        for (const auto& s : z) lf += log_normal_pdf(s.features[0]);
        return lf + beta * z.back().features[0];
    }};
}

DensityRatio exp_ratio(double beta) {
    return {[beta](std::span<const double> x) { return std::exp(beta * x[0]); }};
}

ScoreFunction residual_score() {
    return ScoreFunction::split([](const LabeledSample& z) { return std::abs(z.outcome.value() - z.features[0]); });
}

}  // namespace

TEST_CASE("weight vector normalization") {
    const auto w = WeightVector::normalized({0.5, 0.5 + 1e-8});
    CHECK(w[0] + w[1] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK_THROWS_AS(WeightVector::normalized({0.5, 0.6}), DomainError);
    CHECK_THROWS_AS(WeightVector::normalized({1.5, -0.5}), DomainError);
    CHECK_THROWS_AS(WeightVector::from_masses({0.0, 0.0}), DomainError);
    const auto u = WeightVector::uniform(4);
    CHECK(u.is_uniform());
    CHECK(u[2] == 0.25);
}

TEST_CASE("brute-force weights: exchangeable law is uniform") {
    const JointLaw exch{[](std::span<const LabeledSample> z) {
        double lf = 0.0;
        for (const auto& s : z) lf += log_normal_pdf(s.outcome.value());
        return lf;
    }};
    const std::vector<LabeledSample> z{point(0, 1), point(0, 2), point(0, -1), point(0, 5)};
    const auto w = permutation_weights_bruteforce(exch, z);
    for (std::size_t i = 0; i < 4; ++i) CHECK(w[i] == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("brute-force weights: covariate shift with two points") {
    // Ratio values 2 and 1: dQ/dP = exp(beta x) with exp(beta x_1) = 2, exp(beta x_2) = 1.
    const double beta = std::log(2.0);
    const std::vector<LabeledSample> z{point(1.0, 0), point(0.0, 0)};
    const auto w = permutation_weights_bruteforce(covariate_shift_law(beta), z);
    CHECK(w[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-13));
    CHECK(w[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-13));
    const std::vector<std::vector<double>> f{{1.0}, {0.0}};
    const auto c = covariate_shift_weights(exp_ratio(beta), f);
    CHECK(c[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-13));
}

TEST_CASE("brute-force weights: degenerate law") {
    // Finite only when the outcomes appear in increasing order, so the largest is last.
    const JointLaw sorted_only{[](std::span<const LabeledSample> z) {
        for (std::size_t i = 1; i < z.size(); ++i)
            if (z[i - 1].outcome.value() >= z[i].outcome.value()) return -std::numeric_limits<double>::infinity();
        return 0.0;
    }};
    const std::vector<LabeledSample> z{point(0, 3), point(0, 1), point(0, 2)};
    const auto w = permutation_weights_bruteforce(sorted_only, z);
    CHECK(w[0] == 1.0);
    CHECK(w[1] == 0.0);
    CHECK(w[2] == 0.0);
}

TEST_CASE("brute-force weights refuse large inputs") {
    std::vector<LabeledSample> z(kMaxBruteForcePoints + 1, point(0, 0));
    CHECK_THROWS_AS(permutation_weights_bruteforce(covariate_shift_law(1.0), z), DomainError);
}

TEST_CASE("covariate-shift weights") {
    const DensityRatio table{[](std::span<const double> x) { return x[0]; }};
    const std::vector<std::vector<double>> ones{{1}, {1}, {1}};
    auto w = covariate_shift_weights(table, ones);
    for (std::size_t i = 0; i < 3; ++i) CHECK(w[i] == doctest::Approx(1.0 / 3.0));
    const std::vector<std::vector<double>> two{{2}, {1}, {1}};
    w = covariate_shift_weights(table, two);
    CHECK(w[0] == doctest::Approx(0.5));
    CHECK(w[1] == doctest::Approx(0.25));
    const std::vector<std::vector<double>> zero{{0}, {1}, {1}};
    w = covariate_shift_weights(table, zero);
    CHECK(w[0] == 0.0);
    const std::vector<std::vector<double>> all_zero{{0}, {0}};
    CHECK_THROWS_AS(covariate_shift_weights(table, all_zero), DomainError);
    const std::vector<std::vector<double>> negative{{-1}, {1}};
    CHECK_THROWS_AS(covariate_shift_weights(table, negative), DomainError);

    const std::vector<std::vector<double>> big{{100}, {1}, {1}};
    w = covariate_shift_weights(table, big, 10.0);
    CHECK(w.clipped());
    CHECK(w[0] == doctest::Approx(10.0 / 12.0));
    CHECK(!covariate_shift_weights(table, two).clipped());
}

TEST_CASE("covariate-shift weights match brute force on factorized laws") {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> z;
    std::uniform_real_distribution<double> b(-2.0, 2.0);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t m = 2 + static_cast<std::size_t>(trial % 6);  // n + 1 in [2, 7]
        const double beta = b(rng);
        std::vector<LabeledSample> pts;
        std::vector<std::vector<double>> feats;
        for (std::size_t i = 0; i < m; ++i) {
            pts.push_back(point(z(rng), z(rng)));
            feats.push_back(pts.back().features);
        }
        const auto brute = permutation_weights_bruteforce(covariate_shift_law(beta), pts);
        const auto fast = covariate_shift_weights(exp_ratio(beta), feats);
        for (std::size_t i = 0; i < m; ++i) CHECK(std::abs(brute[i] - fast[i]) <= 1e-10);
    }
}

TEST_CASE("weighted p examples") {
    const std::vector<double> calib{1.0, 2.0};
    const auto w = WeightVector::normalized({0.5, 0.3, 0.2});
    CHECK(weighted_rank_p(calib, 5.0, w) == doctest::Approx(0.2));
    CHECK(weighted_rank_p(calib, 0.0, w) == doctest::Approx(1.0));
    CHECK(weighted_rank_p(calib, 1.5, w) == doctest::Approx(0.5));
    const auto wrong = WeightVector::uniform(4);
    CHECK_THROWS_AS(weighted_rank_p(calib, 1.0, wrong), DomainError);
}

TEST_CASE("uniform weights reproduce the classical p-value exactly") {
    std::mt19937_64 rng(37);
    std::uniform_int_distribution<int> val(0, 5);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 1 + static_cast<std::size_t>(trial % 25);
        std::vector<LabeledSample> v;
        for (std::size_t i = 0; i < n; ++i) v.push_back(point(val(rng), val(rng)));
        const CalibrationSet calib(v);
        const TestPoint t{{static_cast<double>(val(rng))}, std::nullopt};
        const auto y = Outcome::real(val(rng));
        const auto classical = conformal_p(y, calib, t, residual_score());
        const double weighted = weighted_p(y, calib, t, residual_score(), WeightVector::uniform(n + 1));
        CHECK(weighted == classical.value());
    }
}

TEST_CASE("weighted p is invariant to rescaling the ratio") {
    std::mt19937_64 rng(41);
    std::normal_distribution<double> z;
    std::vector<LabeledSample> v;
    std::vector<std::vector<double>> f;
    for (int i = 0; i < 12; ++i) {
        v.push_back(point(z(rng), z(rng)));
        f.push_back(v.back().features);
    }
    const CalibrationSet calib(v);
    const TestPoint t{{0.7}, std::nullopt};
    f.push_back(t.features);
    const auto w1 = covariate_shift_weights(exp_ratio(0.8), f);
    const DensityRatio scaled{[](std::span<const double> x) { return 37.5 * std::exp(0.8 * x[0]); }};
    const auto w2 = covariate_shift_weights(scaled, f);
    for (double y : {-2.0, -0.5, 0.0, 0.4, 1.3, 3.0}) {
        const double a = weighted_p(Outcome::real(y), calib, t, residual_score(), w1);
        const double b = weighted_p(Outcome::real(y), calib, t, residual_score(), w2);
        CHECK(a == doctest::Approx(b).epsilon(1e-14));
    }
}

TEST_CASE("weighted prediction sets") {
    std::mt19937_64 rng(43);
    std::normal_distribution<double> z;
    std::vector<LabeledSample> v;
    for (int i = 0; i < 4; ++i) {
        const double x = z(rng);
        v.push_back(point(x, x + z(rng)));
    }
    const CalibrationSet calib(v);
    const TestPoint t{{0.9}, std::nullopt};
    const std::vector<Outcome> candidates{Outcome::real(0.8), Outcome::real(3.5)};

    SUBCASE("uniform weights reproduce inversion") {
        for (double alpha : {0.1, 0.21, 0.41, 0.61, 0.81}) {
            const auto a = weighted_prediction_set(candidates, calib, t, residual_score(), WeightVector::uniform(5), alpha);
            const auto b = prediction_set_by_inversion(candidates, calib, t, residual_score(), alpha);
            CHECK(a.size() == b.size());
            for (const auto& c : candidates) CHECK(a.contains(c) == b.contains(c));
        }
    }
    SUBCASE("ratio and brute-force law agree at n = 4") {
        for (double alpha : {0.05, 0.15, 0.3, 0.5}) {
            const auto a = weighted_prediction_set(candidates, calib, t, residual_score(), exp_ratio(1.2), alpha);
            const auto b =
                weighted_prediction_set(candidates, calib, t, residual_score(), covariate_shift_law(1.2), alpha);
            for (const auto& c : candidates) CHECK(a.contains(c) == b.contains(c));
        }
    }
    SUBCASE("extreme shift toward the test point keeps every candidate") {
        std::vector<LabeledSample> five(v);
        five.push_back(point(-0.3, 0.1));
        const CalibrationSet c5(five);
        const DensityRatio spike{[](std::span<const double> x) { return x[0] == 5.0 ? 1e6 : 1.0; }};
        const TestPoint far{{5.0}, std::nullopt};
        std::vector<Outcome> many;
        for (int i = -20; i <= 20; ++i) many.push_back(Outcome::real(i));
        const auto set = weighted_prediction_set(many, c5, far, residual_score(), spike, 0.1);
        CHECK(set.size() == static_cast<long long>(many.size()));
        std::vector<std::vector<double>> feats;
        for (const auto& s : five) feats.push_back(s.features);
        feats.push_back(far.features);
        const auto w = covariate_shift_weights(spike, feats);
        CHECK(w[5] > 1 - 1e-5);
        for (const auto& y : many) CHECK(weighted_p(y, c5, far, residual_score(), w) > 1 - 1e-5);
    }
}
