#include "conformal/split_conformal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "conformal/random.hpp"

namespace conformal {

namespace {

constexpr double kMassTolerance = 1e-6;
constexpr std::uint64_t kCalibrationUTag = 0x63616c6962000001ULL;
constexpr std::uint64_t kTestUTag = 0x7465737400000002ULL;

const RegressionFn& require(const RegressionFn& fn, const char* name) {
    if (!fn) throw DomainError(std::string("regression model '") + name + "' is not provided");
    return fn;
}

double real_outcome(const LabeledSample& z) {
    if (!z.outcome.is_real()) throw DomainError("regression method requires real outcomes");
    return z.outcome.value();
}

int category_outcome(const LabeledSample& z) {
    if (!z.outcome.is_category()) throw DomainError("classification method requires categorical outcomes");
    return z.outcome.label();
}

double model_value(const RegressionFn& fn, std::span<const double> x) {
    const double v = fn(x);
    if (std::isnan(v)) throw DomainError("regression model returned NaN");
    return v;
}

// Labels ordered by decreasing probability, ties by increasing label index (0-based).
std::vector<int> label_order(std::span<const double> probs) {
    std::vector<int> order(probs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return probs[a] > probs[b]; });
    return order;
}

}  // namespace

ExtendedReal classification_threshold(const ScoreBag& scores, double alpha) {
    check_alpha(alpha);
    if (scores.empty()) throw DomainError("empty calibration set");
    const double n = static_cast<double>(scores.size());
    return empirical_quantile(scores, (1.0 - alpha) * (1.0 + 1.0 / n));
}

std::vector<double> normalize_probabilities(std::vector<double> p) {
    if (p.empty()) throw DomainError("empty probability vector");
    double total = 0.0;
    for (double v : p) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("probabilities must be finite and nonnegative");
        total += v;
    }
    if (std::abs(total - 1.0) > kMassTolerance)
        throw DomainError("probability vector sums to " + std::to_string(total));
    for (double& v : p) v /= total;
    return p;
}

std::vector<double> Classifier::probabilities(std::span<const double> features) const {
    if (!pi_hat) throw DomainError("classifier callback is not provided");
    return normalize_probabilities(pi_hat(features));
}

ExtendedReal conformal_quantile(const ScoreBag& scores, double alpha) {
    check_alpha(alpha);
    if (scores.empty()) throw DomainError("empty calibration set");
    const double n = static_cast<double>(scores.size());
    return empirical_quantile(scores, (1.0 - alpha) * (n + 1.0) / n);
}

ExtendedReal one_sided_upper_bound(const ScoreBag& y_values, double alpha) {
    check_alpha(alpha);
    if (y_values.empty()) throw DomainError("empty calibration set");
    const auto n = static_cast<long long>(y_values.size());
    const long long rank = ceil_rank((1.0 - alpha) * static_cast<double>(n + 1));
    if (rank > n) return ExtendedReal::pos_inf();
    return order_statistic(y_values, static_cast<std::size_t>(std::max(rank, 1LL)));
}

ScoreBag absolute_residuals(const RegressionModels& models, const CalibrationSet& calib) {
    const auto& m = require(models.mean_hat, "mean_hat");
    std::vector<double> s;
    s.reserve(calib.size());
    for (const auto& z : calib.samples()) s.push_back(std::abs(real_outcome(z) - model_value(m, z.features)));
    return ScoreBag(std::move(s));
}

ScoreBag cqr_scores(const RegressionModels& models, const CalibrationSet& calib) {
    const auto& lo = require(models.q_lo_hat, "q_lo_hat");
    const auto& hi = require(models.q_hi_hat, "q_hi_hat");
    std::vector<double> s;
    s.reserve(calib.size());
    for (const auto& z : calib.samples()) {
        const double y = real_outcome(z);
        s.push_back(std::max(model_value(lo, z.features) - y, y - model_value(hi, z.features)));
    }
    return ScoreBag(std::move(s));
}

PredictionSet mean_residual_interval(double prediction, const ScoreBag& residuals, double alpha) {
    const ExtendedReal half = conformal_quantile(residuals, alpha);
    if (half.is_pos_inf()) return {Interval{ExtendedReal::neg_inf(), ExtendedReal::pos_inf(), false}, alpha};
    return {Interval{prediction - half.value(), prediction + half.value(), false}, alpha};
}

PredictionSet mean_residual_interval(const RegressionModels& models, const CalibrationSet& calib,
                                     std::span<const double> test_features, double alpha) {
    const auto residuals = absolute_residuals(models, calib);
    return mean_residual_interval(model_value(models.mean_hat, test_features), residuals, alpha);
}

PredictionSet cqr_interval(double q_lo, double q_hi, const ScoreBag& scores, double alpha) {
    if (q_lo > q_hi) warn("quantile models cross at the test point (q_lo > q_hi)");
    const ExtendedReal tau = conformal_quantile(scores, alpha);
    if (tau.is_pos_inf()) return {Interval{ExtendedReal::neg_inf(), ExtendedReal::pos_inf(), false}, alpha};
    const double lower = q_lo - tau.value();
    const double upper = q_hi + tau.value();
    return {Interval{lower, upper, lower > upper}, alpha};
}

PredictionSet cqr_interval(const RegressionModels& models, const CalibrationSet& calib,
                           std::span<const double> test_features, double alpha) {
    const auto scores = cqr_scores(models, calib);
    return cqr_interval(model_value(models.q_lo_hat, test_features), model_value(models.q_hi_hat, test_features),
                        scores, alpha);
}

ScoreBag class_threshold_scores(const Classifier& clf, const CalibrationSet& calib) {
    std::vector<double> s;
    s.reserve(calib.size());
    for (const auto& z : calib.samples()) {
        const int y = category_outcome(z);
        const auto p = clf.probabilities(z.features);
        if (static_cast<int>(p.size()) != z.outcome.num_classes())
            throw DomainError("classifier output length does not match the number of classes");
        s.push_back(-p[static_cast<std::size_t>(y - 1)]);
    }
    return ScoreBag(std::move(s));
}

PredictionSet classification_threshold_set(std::span<const double> probs, ExtendedReal threshold, double alpha) {
    LabelSet set{{}, static_cast<int>(probs.size())};
    for (std::size_t k = 0; k < probs.size(); ++k)
        if (ExtendedReal(-probs[k]) <= threshold) set.labels.push_back(static_cast<int>(k) + 1);
    return {set, alpha};
}

PredictionSet classification_threshold_set(const Classifier& clf, const CalibrationSet& calib,
                                           std::span<const double> test_features, double alpha) {
    const auto scores = class_threshold_scores(clf, calib);
    const auto probs = clf.probabilities(test_features);
    return classification_threshold_set(probs, classification_threshold(scores, alpha), alpha);
}

double cumulative_probability_score(std::span<const double> probs, int label, std::optional<double> u) {
    if (label < 1 || label > static_cast<int>(probs.size())) throw DomainError("label out of range");
    const auto order = label_order(probs);
    double mass = 0.0;
    for (int k : order) {
        mass += probs[static_cast<std::size_t>(k)];
        if (k == label - 1) break;
    }
    if (u) mass -= *u * probs[static_cast<std::size_t>(label - 1)];
    return mass;
}

ScoreBag cumulative_scores(const Classifier& clf, const CalibrationSet& calib, bool randomize, std::uint64_t seed) {
    std::vector<double> s;
    s.reserve(calib.size());
    for (std::size_t i = 0; i < calib.size(); ++i) {
        const auto& z = calib[i];
        const int y = category_outcome(z);
        const auto p = clf.probabilities(z.features);
        std::optional<double> u;
        if (randomize) u = z.tiebreak_u ? *z.tiebreak_u : Stream(seed, {kCalibrationUTag, i}).uniform();
        s.push_back(cumulative_probability_score(p, y, u));
    }
    return ScoreBag(std::move(s));
}

PredictionSet cumulative_probability_set(std::span<const double> probs, ExtendedReal threshold,
                                         std::optional<double> u, double alpha) {
    LabelSet set{{}, static_cast<int>(probs.size())};
    for (int k = 1; k <= static_cast<int>(probs.size()); ++k)
        if (ExtendedReal(cumulative_probability_score(probs, k, u)) <= threshold) set.labels.push_back(k);
    return {set, alpha};
}

PredictionSet cumulative_probability_set(const Classifier& clf, const CalibrationSet& calib,
                                         const TestPoint& test, double alpha, bool randomize, std::uint64_t seed) {
    const auto scores = cumulative_scores(clf, calib, randomize, seed);
    const auto probs = clf.probabilities(test.features);
    std::optional<double> u;
    if (randomize) u = test.tiebreak_u ? *test.tiebreak_u : Stream(seed, {kTestUTag}).uniform();
    return cumulative_probability_set(probs, classification_threshold(scores, alpha), u, alpha);
}

PValueResult mondrian_p(const Outcome& candidate_y, const CalibrationSet& calib, const TestPoint& test,
                        const ScoreFunction& score, const StratumFn& stratum_of) {
    if (!stratum_of) throw DomainError("stratum function is not provided");
    const auto test_stratum = stratum_of(test.with_outcome(candidate_y));
    const auto scores = augmented_scores(candidate_y, calib, test, score);
    std::vector<double> in_stratum;
    for (std::size_t i = 0; i < calib.size(); ++i)
        if (stratum_of(calib[i]) == test_stratum) in_stratum.push_back(scores.calibration[i]);
    return rank_p_value(in_stratum, scores.test);
}

}  // namespace conformal
