#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <variant>
#include <vector>

#include "conformal/core_types.hpp"

namespace conformal {

/// Nonconformity score s((x, y); D).
///
/// Split mode ignores the reference bag. Full mode receives the hypothesized
/// bag D(y) of n + 1 samples and may depend on it only as an unordered multiset.
class ScoreFunction {
public:
    using SplitFn = std::function<double(const LabeledSample&)>;
    using FullFn = std::function<double(const LabeledSample&, std::span<const LabeledSample>)>;

    static ScoreFunction split(SplitFn fn);
    static ScoreFunction full(FullFn fn);

    bool is_full() const { return std::holds_alternative<FullFn>(fn_); }

    /// Evaluates the score; NaN results raise DomainError, callback failures OperationalError.
    double operator()(const LabeledSample& point, std::span<const LabeledSample> bag) const;

private:
    explicit ScoreFunction(std::variant<SplitFn, FullFn> fn) : fn_(std::move(fn)) {}
    std::variant<SplitFn, FullFn> fn_;
};

/// Exact conformal p-value (1 + rank_count) / (n + 1).
struct PValueResult {
    std::size_t rank_count = 0;
    std::size_t n = 0;

    std::size_t numerator() const { return rank_count + 1; }
    std::size_t denominator() const { return n + 1; }
    double value() const { return static_cast<double>(numerator()) / static_cast<double>(denominator()); }
    /// p > alpha, decided on the integer numerator; alpha(n + 1) within 1e-9 of an integer is snapped.
    bool exceeds(double alpha) const;

    friend bool operator==(const PValueResult&, const PValueResult&) = default;
};

struct LabelSet {
    std::vector<int> labels;
    int K = 0;
};

/// Finite subset of real-valued candidates.
struct ValueSet {
    std::vector<double> values;
};

struct Interval {
    ExtendedReal lower;
    ExtendedReal upper;
    bool empty = false;
};

/// All of the outcome space (full) or nothing.
struct Randomized {
    bool full = false;
};

struct PredictionSet {
    std::variant<LabelSet, ValueSet, Interval, Randomized> region;
    double alpha = 0.0;

    bool contains(const Outcome& y) const;
    /// Number of labels or values; Interval and Randomized report 0 or "infinite" via -1.
    long long size() const;

    const LabelSet& label_set() const { return std::get<LabelSet>(region); }
    const Interval& interval() const { return std::get<Interval>(region); }
};

/// Scores of the n calibration points and the test point under D(y).
struct AugmentedScores {
    std::vector<double> calibration;
    double test = 0.0;
};

AugmentedScores augmented_scores(const Outcome& candidate_y, const CalibrationSet& calib,
                                 const TestPoint& test, const ScoreFunction& score);

/// rank_count = #{i : s(test) <= s(Z_i)}.
PValueResult rank_p_value(std::span<const double> calibration_scores, double test_score);

PValueResult conformal_p(const Outcome& candidate_y, const CalibrationSet& calib, const TestPoint& test,
                         const ScoreFunction& score);

/// {y in candidates : p(y) > alpha}.
PredictionSet prediction_set_by_inversion(std::span<const Outcome> candidates, const CalibrationSet& calib,
                                          const TestPoint& test, const ScoreFunction& score, double alpha);

/// Adds independent Uniform(0, epsilon) noise to each score, deterministic in the seed.
ScoreBag add_tiebreak_noise(const ScoreBag& scores, double epsilon, std::uint64_t seed);

void check_alpha(double alpha);

}  // namespace conformal
