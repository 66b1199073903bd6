#include <doctest.h>

#include <cmath>
#include <random>

#include "conformal/categorical.hpp"
#include "conformal/split_conformal.hpp"
#include "oracles.hpp"

using namespace conformal;

namespace {

LabeledSample real_case(std::vector<double> x, double y) { return {std::move(x), std::nullopt, Outcome::real(y)}; }

LabeledSample class_case(std::vector<double> probs, int label, std::optional<double> u = std::nullopt) {
    const int K = static_cast<int>(probs.size());
    return {std::move(probs), u, Outcome::category(label, K)};
}

// Classifier whose features are the probability vector itself.
Classifier identity_classifier() {
    return {[](std::span<const double> x) { return std::vector<double>(x.begin(), x.end()); }, true};
}

}  // namespace

TEST_CASE("one-sided upper bound examples") {
    CHECK(one_sided_upper_bound(ScoreBag{1, 2, 3, 4}, 0.25) == ExtendedReal(4.0));
    CHECK(one_sided_upper_bound(ScoreBag{1, 2, 3, 4}, 0.10).is_pos_inf());
    CHECK(one_sided_upper_bound(ScoreBag{10, 20, 30}, 0.5) == ExtendedReal(20.0));
    CHECK_THROWS_AS(one_sided_upper_bound(ScoreBag{}, 0.1), DomainError);
    CHECK_THROWS_AS(one_sided_upper_bound(ScoreBag{1}, 0.0), DomainError);
}

TEST_CASE("one-sided bound equals the quantile at the inflated level") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> z;
    for (std::size_t n = 1; n <= 40; ++n) {
        std::vector<double> y(n);
        for (double& v : y) v = z(rng);
        const ScoreBag bag(y);
        for (double alpha : {0.01, 0.05, 0.1, 0.2, 0.25, 0.5, 0.9}) {
            const auto bound = one_sided_upper_bound(bag, alpha);
            CHECK(bound == empirical_quantile(bag, (1 - alpha) * (1 + 1.0 / static_cast<double>(n))));
            // Sort oracle on {Y_1..Y_n, +inf}.
            std::vector<double> aug = y;
            aug.push_back(oracle::kInf);
            const long long rank = static_cast<long long>(std::ceil((1 - alpha) * static_cast<double>(n + 1) - 1e-9));
            CHECK(bound.value() == oracle::kth_smallest(aug, static_cast<std::size_t>(rank)));
        }
    }
}

TEST_CASE("mean-residual interval examples") {
    const ScoreBag residuals{1, 2, 3, 4};
    auto iv = mean_residual_interval(0.0, residuals, 0.25).interval();
    CHECK(iv.lower == ExtendedReal(-4.0));
    CHECK(iv.upper == ExtendedReal(4.0));

    iv = mean_residual_interval(1.5, ScoreBag{0, 0, 0}, 0.3).interval();
    CHECK(iv.lower == ExtendedReal(1.5));
    CHECK(iv.upper == ExtendedReal(1.5));

    iv = mean_residual_interval(0.0, residuals, 0.05).interval();
    CHECK(iv.lower.is_neg_inf());
    CHECK(iv.upper.is_pos_inf());
}

TEST_CASE("mean-residual interval through model callbacks") {
    RegressionModels m;
    m.mean_hat = [](std::span<const double> x) { return 2.0 * x[0]; };
    const CalibrationSet calib({real_case({1}, 3), real_case({2}, 2), real_case({3}, 9), real_case({4}, 4)});
    // residuals |3-2|, |2-4|, |9-6|, |4-8| = 1, 2, 3, 4
    const auto res = absolute_residuals(m, calib);
    CHECK(std::vector<double>(res.sorted().begin(), res.sorted().end()) == std::vector<double>{1, 2, 3, 4});
    const std::vector<double> x{10.0};
    const auto iv = mean_residual_interval(m, calib, x, 0.25).interval();
    CHECK(iv.lower == ExtendedReal(16.0));
    CHECK(iv.upper == ExtendedReal(24.0));

    const CalibrationSet labels({class_case({0.5, 0.5}, 1)});
    CHECK_THROWS_AS(absolute_residuals(m, labels), DomainError);
    RegressionModels none;
    CHECK_THROWS_AS(absolute_residuals(none, calib), DomainError);
}

TEST_CASE("mean-residual half-width is nonincreasing in alpha") {
    std::mt19937_64 rng(2);
    std::exponential_distribution<double> e;
    std::vector<double> r(50);
    for (double& v : r) v = e(rng);
    const ScoreBag bag(r);
    ExtendedReal prev = ExtendedReal::pos_inf();
    for (double alpha = 0.005; alpha < 1.0; alpha += 0.01) {
        const auto w = mean_residual_interval(0.0, bag, alpha).interval().upper;
        CHECK(w <= prev);
        prev = w;
    }
}

TEST_CASE("CQR examples") {
    auto iv = cqr_interval(0.0, 1.0, ScoreBag{-1, 0, 1, 2}, 0.25).interval();
    CHECK(iv.lower == ExtendedReal(-2.0));
    CHECK(iv.upper == ExtendedReal(3.0));
    CHECK(!iv.empty);

    iv = cqr_interval(0.0, 10.0, ScoreBag{-3, -2, -1}, 0.5).interval();
    CHECK(iv.lower == ExtendedReal(2.0));
    CHECK(iv.upper == ExtendedReal(8.0));

    iv = cqr_interval(-1.0, 1.0, ScoreBag{0, 0, 0}, 0.5).interval();
    CHECK(iv.lower == ExtendedReal(-1.0));
    CHECK(iv.upper == ExtendedReal(1.0));

    // Strong shrinkage makes the interval empty; it is flagged, never swapped.
    iv = cqr_interval(0.0, 1.0, ScoreBag{-3, -2, -1}, 0.5).interval();
    CHECK(iv.empty);
    CHECK(iv.lower == ExtendedReal(2.0));
    CHECK(iv.upper == ExtendedReal(-1.0));
}

TEST_CASE("CQR scores and crossing-quantile warning") {
    RegressionModels m;
    m.q_lo_hat = [](std::span<const double> x) { return x[0] - 1; };
    m.q_hi_hat = [](std::span<const double> x) { return x[0] + 1; };
    const CalibrationSet calib({real_case({0}, 0.5), real_case({0}, 3), real_case({0}, -4)});
    const auto s = cqr_scores(m, calib);
    CHECK(s.values()[0] == doctest::Approx(-0.5));
    CHECK(s.values()[1] == doctest::Approx(2.0));
    CHECK(s.values()[2] == doctest::Approx(3.0));

    std::vector<std::string> warnings;
    set_warning_sink([&](const std::string& w) { warnings.push_back(w); });
    RegressionModels crossed;
    crossed.q_lo_hat = [](std::span<const double>) { return 1.0; };
    crossed.q_hi_hat = [](std::span<const double>) { return -1.0; };
    const std::vector<double> x{0.0};
    (void)cqr_interval(crossed, calib, x, 0.5);
    set_warning_sink(nullptr);
    CHECK(!warnings.empty());
}

TEST_CASE("classification threshold examples") {
    const ScoreBag scores{-0.9, -0.8, -0.5, -0.3};
    const auto tau = classification_threshold(scores, 0.2);
    CHECK(tau == ExtendedReal(-0.3));
    const std::vector<double> probs{0.7, 0.2, 0.1};
    CHECK(classification_threshold_set(probs, tau, 0.2).label_set().labels == std::vector<int>{1});
    CHECK(classification_threshold_set(probs, -0.15, 0.2).label_set().labels == std::vector<int>{1, 2});
    CHECK(classification_threshold_set(probs, ExtendedReal::pos_inf(), 0.2).label_set().labels ==
          std::vector<int>{1, 2, 3});
    CHECK(classification_threshold(ScoreBag{-0.5, -0.4}, 0.1).is_pos_inf());
}

TEST_CASE("classifier probabilities are renormalized or rejected") {
    CHECK(normalize_probabilities({0.5, 0.5000001})[1] == doctest::Approx(0.5));
    CHECK_THROWS_AS(normalize_probabilities({0.6, 0.6}), DomainError);
    CHECK_THROWS_AS(normalize_probabilities({1.2, -0.2}), DomainError);
}

TEST_CASE("classification threshold set through a classifier") {
    const auto clf = identity_classifier();
    const CalibrationSet calib({class_case({0.9, 0.1}, 1), class_case({0.2, 0.8}, 2), class_case({0.5, 0.5}, 1),
                                class_case({0.7, 0.3}, 2)});
    const auto s = class_threshold_scores(clf, calib);
    CHECK(std::vector<double>(s.values().begin(), s.values().end()) == std::vector<double>{-0.9, -0.8, -0.5, -0.3});
    const std::vector<double> x{0.35, 0.65};
    CHECK(classification_threshold_set(clf, calib, x, 0.2).label_set().labels == std::vector<int>{1, 2});
    const std::vector<double> y{0.25, 0.75};
    CHECK(classification_threshold_set(clf, calib, y, 0.2).label_set().labels == std::vector<int>{2});

    const CalibrationSet reals({real_case({0.5, 0.5}, 1.0)});
    CHECK_THROWS_AS(class_threshold_scores(clf, reals), DomainError);
}

TEST_CASE("cumulative probability examples") {
    const std::vector<double> probs{0.5, 0.3, 0.2};
    CHECK(cumulative_probability_score(probs, 1, std::nullopt) == doctest::Approx(0.5));
    CHECK(cumulative_probability_score(probs, 2, std::nullopt) == doctest::Approx(0.8));
    CHECK(cumulative_probability_score(probs, 3, std::nullopt) == doctest::Approx(1.0));
    CHECK(cumulative_probability_set(probs, 0.85, std::nullopt, 0.1).label_set().labels == std::vector<int>{1, 2});
    CHECK(cumulative_probability_set(probs, 0.5, std::nullopt, 0.1).label_set().labels == std::vector<int>{1});

    // Ties are ordered by label index.
    const std::vector<double> tied{0.4, 0.4, 0.2};
    CHECK(cumulative_probability_score(tied, 1, std::nullopt) == doctest::Approx(0.4));
    CHECK(cumulative_probability_score(tied, 2, std::nullopt) == doctest::Approx(0.8));
}

TEST_CASE("cumulative score is one minus the randomized oracle formula") {
    const std::vector<double> probs{0.5, 0.3, 0.2};
    const PopulationPMF pmf(probs);
    for (int y = 1; y <= 3; ++y) {
        CHECK(cumulative_probability_score(probs, y, std::nullopt) == doctest::Approx(1.0 - oracle_p(pmf, y, 0.0)));
        for (int i = 0; i <= 20; ++i) {
            const double u = i / 20.0;
            CHECK(cumulative_probability_score(probs, y, u) == doctest::Approx(1.0 - oracle_p(pmf, y, u)));
        }
    }
    // Label 2 with U = 0.5: p* = 0.2 + 0.3 * 0.5 = 0.35.
    CHECK(oracle_p(pmf, 2, 0.5) == doctest::Approx(0.35));
    CHECK(1.0 - cumulative_probability_score(probs, 2, 0.5) == doctest::Approx(0.35));
}

TEST_CASE("cumulative set through a classifier is seeded and replayable") {
    const auto clf = identity_classifier();
    std::vector<LabeledSample> v;
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> unif(0.05, 1.0);
    for (int i = 0; i < 30; ++i) {
        std::vector<double> p{unif(rng), unif(rng), unif(rng)};
        const double t = p[0] + p[1] + p[2];
        for (double& q : p) q /= t;
        v.push_back(class_case(p, 1 + i % 3));
    }
    const CalibrationSet calib(v);
    const TestPoint test{{0.5, 0.3, 0.2}, std::nullopt};
    const auto a = cumulative_probability_set(clf, calib, test, 0.1, true, 99);
    const auto b = cumulative_probability_set(clf, calib, test, 0.1, true, 99);
    CHECK(a.label_set().labels == b.label_set().labels);
    const auto s1 = cumulative_scores(clf, calib, true, 99);
    const auto s2 = cumulative_scores(clf, calib, true, 99);
    CHECK(std::equal(s1.values().begin(), s1.values().end(), s2.values().begin()));
    const auto det = cumulative_scores(clf, calib, false, 0);
    for (std::size_t i = 0; i < det.size(); ++i) CHECK(s1.values()[i] <= det.values()[i]);
}

TEST_CASE("classification sets satisfy the coverage sandwich by exhaustive test-role assignment") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> unif(0.01, 1.0);
    const auto clf = identity_classifier();
    for (std::size_t n = 3; n <= 9; ++n) {
        std::vector<LabeledSample> pts;
        for (std::size_t i = 0; i <= n; ++i) {
            std::vector<double> p{unif(rng), unif(rng), unif(rng), unif(rng)};
            const double t = p[0] + p[1] + p[2] + p[3];
            for (double& q : p) q /= t;
            pts.push_back(class_case(p, 1 + static_cast<int>(i % 4), unif(rng)));
        }
        for (std::size_t k = 1; k <= n; ++k) {
            const double alpha = static_cast<double>(k) / static_cast<double>(n + 1);
            std::size_t covered_thr = 0;
            std::size_t covered_cum = 0;
            for (std::size_t j = 0; j <= n; ++j) {
                std::vector<LabeledSample> calib;
                for (std::size_t i = 0; i <= n; ++i)
                    if (i != j) calib.push_back(pts[i]);
                const CalibrationSet c(calib);
                const TestPoint test{pts[j].features, pts[j].tiebreak_u};
                if (classification_threshold_set(clf, c, test.features, alpha).contains(pts[j].outcome)) ++covered_thr;
                if (cumulative_probability_set(clf, c, test, alpha, true, 0).contains(pts[j].outcome)) ++covered_cum;
            }
            // 1 - alpha <= coverage <= 1 - alpha + 1/(n+1), as counts over n + 1 roles.
            for (std::size_t covered : {covered_thr, covered_cum}) {
                CHECK(covered >= n + 1 - k);
                CHECK(covered <= n + 2 - k);
            }
        }
    }
}

TEST_CASE("Mondrian p-values") {
    // Stratum from the outcome label; scores from the first feature.
    const auto score = ScoreFunction::split([](const LabeledSample& z) { return z.features.at(0); });
    const StratumFn by_label = [](const LabeledSample& z) { return static_cast<long long>(z.outcome.label()); };
    const CalibrationSet calib({LabeledSample{{1.0}, {}, Outcome::category(1, 2)},
                                LabeledSample{{3.0}, {}, Outcome::category(1, 2)},
                                LabeledSample{{0.5}, {}, Outcome::category(2, 2)}});
    auto p = mondrian_p(Outcome::category(1, 2), calib, TestPoint{{2.0}, {}}, score, by_label);
    CHECK(p.numerator() == 2);
    CHECK(p.denominator() == 3);

    const StratumFn global = [](const LabeledSample&) { return 0LL; };
    CHECK(mondrian_p(Outcome::category(1, 2), calib, TestPoint{{2.0}, {}}, score, global) ==
          conformal_p(Outcome::category(1, 2), calib, TestPoint{{2.0}, {}}, score));

    const CalibrationSet only_one({LabeledSample{{1.0}, {}, Outcome::category(1, 2)}});
    p = mondrian_p(Outcome::category(2, 2), only_one, TestPoint{{9.0}, {}}, score, by_label);
    CHECK(p.numerator() == 1);
    CHECK(p.denominator() == 1);
}

TEST_CASE("Mondrian p-values give label-conditional coverage") {
    // Three classes with shifted normal features; score |x - mu_y|.
    const double mu[3] = {-2.0, 0.0, 2.0};
    const std::discrete_distribution<int> label_dist_proto({0.6, 0.3, 0.1});
    const auto score = ScoreFunction::split([&](const LabeledSample& z) {
        return std::abs(z.features[0] - mu[z.outcome.label() - 1]);
    });
    const StratumFn by_label = [](const LabeledSample& z) { return static_cast<long long>(z.outcome.label()); };
    const double alpha = 0.1;
    const std::size_t n = 60;
    const std::size_t reps = 6000;
    std::size_t hits[3] = {0, 0, 0};
    std::size_t totals[3] = {0, 0, 0};
    std::mt19937_64 rng(12);
    std::normal_distribution<double> z;
    for (std::size_t r = 0; r < reps; ++r) {
        auto ld = label_dist_proto;
        std::vector<LabeledSample> v;
        for (std::size_t i = 0; i < n; ++i) {
            const int y = ld(rng) + 1;
            v.push_back({{mu[y - 1] + z(rng)}, {}, Outcome::category(y, 3)});
        }
        const int y = ld(rng) + 1;
        const TestPoint t{{mu[y - 1] + z(rng)}, {}};
        const auto p = mondrian_p(Outcome::category(y, 3), CalibrationSet(v), t, score, by_label);
        ++totals[y - 1];
        if (p.exceeds(alpha)) ++hits[y - 1];
    }
    for (int c = 0; c < 3; ++c) {
        const double cov = static_cast<double>(hits[c]) / static_cast<double>(totals[c]);
        const double se = std::sqrt(cov * (1 - cov) / static_cast<double>(totals[c]));
        CHECK(cov >= 1 - alpha - 3 * se);
    }
}
