#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "conformal/core_types.hpp"
#include "conformal/pvalue_engine.hpp"

namespace conformal {

using RegressionFn = std::function<double(std::span<const double>)>;
using ProbabilityFn = std::function<std::vector<double>(std::span<const double>)>;

/// Black-box regression callbacks. Any of them may be absent.
struct RegressionModels {
    RegressionFn mean_hat;
    RegressionFn q_lo_hat;
    RegressionFn q_hi_hat;
    /// Callbacks may be invoked concurrently.
    bool thread_safe = true;
};

struct Classifier {
    ProbabilityFn pi_hat;
    bool thread_safe = true;

    /// Evaluates pi_hat and renormalizes (mass must be within 1e-6 of one).
    std::vector<double> probabilities(std::span<const double> features) const;
};

/// Checks a probability vector and rescales it to unit mass.
std::vector<double> normalize_probabilities(std::vector<double> p);

/// Split-conformal threshold Q(P_hat(S); (1 - alpha)(n + 1) / n).
ExtendedReal conformal_quantile(const ScoreBag& scores, double alpha);

/// The ceil((1 - alpha)(n + 1))-th smallest of {Y_1, ..., Y_n, +inf}.
ExtendedReal one_sided_upper_bound(const ScoreBag& y_values, double alpha);

/// Absolute residuals |Y_i - m_hat(X_i)| over the calibration set.
ScoreBag absolute_residuals(const RegressionModels& models, const CalibrationSet& calib);
/// max{q_lo(X_i) - Y_i, Y_i - q_hi(X_i)} over the calibration set.
ScoreBag cqr_scores(const RegressionModels& models, const CalibrationSet& calib);

PredictionSet mean_residual_interval(const RegressionModels& models, const CalibrationSet& calib,
                                     std::span<const double> test_features, double alpha);
PredictionSet mean_residual_interval(double prediction, const ScoreBag& residuals, double alpha);

PredictionSet cqr_interval(const RegressionModels& models, const CalibrationSet& calib,
                           std::span<const double> test_features, double alpha);
PredictionSet cqr_interval(double q_lo, double q_hi, const ScoreBag& scores, double alpha);

/// Classification threshold Q(P_hat(S); (1 - alpha)(1 + 1/n)).
ExtendedReal classification_threshold(const ScoreBag& scores, double alpha);

/// Calibration scores -pi_hat_{Y_i}(X_i).
ScoreBag class_threshold_scores(const Classifier& clf, const CalibrationSet& calib);

PredictionSet classification_threshold_set(const Classifier& clf, const CalibrationSet& calib,
                                           std::span<const double> test_features, double alpha);
/// Labels y with -probs[y] <= threshold.
PredictionSet classification_threshold_set(std::span<const double> probs, ExtendedReal threshold, double alpha);

/// Cumulative mass of the labels ranked at or before `label` (decreasing probability,
/// ties by label index), minus u * probs[label] when u is given.
double cumulative_probability_score(std::span<const double> probs, int label, std::optional<double> u);

/// Calibration scores of the cumulative-probability method. When `randomize` is set,
/// each case uses its own tiebreak_u, or a seeded draw when absent.
ScoreBag cumulative_scores(const Classifier& clf, const CalibrationSet& calib, bool randomize, std::uint64_t seed);

PredictionSet cumulative_probability_set(const Classifier& clf, const CalibrationSet& calib,
                                         const TestPoint& test, double alpha, bool randomize, std::uint64_t seed);
/// Labels whose cumulative score (with the shared test u) is <= threshold.
PredictionSet cumulative_probability_set(std::span<const double> probs, ExtendedReal threshold,
                                         std::optional<double> u, double alpha);

using StratumFn = std::function<long long(const LabeledSample&)>;

/// Conformal p-value with the ranking restricted to the test case's stratum.
PValueResult mondrian_p(const Outcome& candidate_y, const CalibrationSet& calib, const TestPoint& test,
                        const ScoreFunction& score, const StratumFn& stratum_of);

}  // namespace conformal
