#pragma once

#include <functional>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "conformal/core_types.hpp"
#include "conformal/pvalue_engine.hpp"

namespace conformal {

/// Log joint density (or mass) of an ordered list of n + 1 samples, up to a constant.
struct JointLaw {
    std::function<double(std::span<const LabeledSample>)> log_f;
};

/// dQ_X / dP_X evaluated at a feature vector.
struct DensityRatio {
    std::function<double(std::span<const double>)> ratio;
};

/// Nonnegative weights over the n + 1 positions summing to one; the last entry
/// belongs to the test case.
class WeightVector {
public:
    /// Weights that should already sum to one: renormalized when within 1e-6,
    /// rejected beyond.
    static WeightVector normalized(std::vector<double> w);
    /// Arbitrary nonnegative masses, divided by their (positive) total.
    static WeightVector from_masses(std::vector<double> masses);
    static WeightVector uniform(std::size_t n_plus_one);

    std::span<const double> values() const { return w_; }
    std::size_t size() const { return w_.size(); }
    double operator[](std::size_t i) const { return w_[i]; }

    /// Set when ratio clipping was applied (diagnostics only).
    bool clipped() const { return clipped_; }
    void mark_clipped() { clipped_ = true; }
    /// All entries equal; weighted p-values then reduce to the exact classical rank.
    bool is_uniform() const { return uniform_; }

private:
    explicit WeightVector(std::vector<double> w);
    std::vector<double> w_;
    bool clipped_ = false;
    bool uniform_ = false;
};

inline constexpr std::size_t kMaxBruteForcePoints = 9;

/// Permutation weights by enumerating all (n + 1)! orderings: w_i is the share of total
/// joint mass carried by orderings that put z_i in the test position.
WeightVector permutation_weights_bruteforce(const JointLaw& law, std::span<const LabeledSample> z);

/// w_i = r(X_i) / sum_j r(X_j). With `clip`, ratios above it are capped and the
/// result is flagged.
WeightVector covariate_shift_weights(const DensityRatio& ratio, std::span<const std::vector<double>> features,
                                     std::optional<double> clip = std::nullopt);

/// p = sum_i w_i 1{s(test) <= s(Z_i)} over the augmented sample; the test term always fires.
double weighted_p(const Outcome& candidate_y, const CalibrationSet& calib, const TestPoint& test,
                  const ScoreFunction& score, const WeightVector& weights);

double weighted_rank_p(std::span<const double> calibration_scores, double test_score, const WeightVector& weights);

using WeightSource = std::variant<DensityRatio, JointLaw, WeightVector>;

/// {y : p^f(y) > alpha}. Ratio-based weights are computed once; law-based
/// weights are recomputed per candidate.
PredictionSet weighted_prediction_set(std::span<const Outcome> candidates, const CalibrationSet& calib,
                                      const TestPoint& test, const ScoreFunction& score, const WeightSource& source,
                                      double alpha);

}  // namespace conformal
