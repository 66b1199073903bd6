#pragma once

#include <span>
#include <vector>

#include "conformal/core_types.hpp"
#include "conformal/pvalue_engine.hpp"

namespace conformal {

struct OutlierBatch {
    CalibrationSet reference;
    std::vector<LabeledSample> tests;
};

struct BhResult {
    std::vector<std::size_t> rejected;  // ascending test indices
    double q = 0.0;
    std::vector<double> per_test_p;
};

/// Reference scores sorted once; each test p-value is a binary search.
class ReferenceScores {
public:
    explicit ReferenceScores(ScoreBag scores) : scores_(std::move(scores)) {}
    ReferenceScores(const CalibrationSet& reference, const ScoreFunction& split_score);

    /// (1 + #{i : s <= S_i}) / (n + 1).
    PValueResult p_value(double test_score) const;
    std::size_t size() const { return scores_.size(); }

private:
    ScoreBag scores_;
};

/// Conformal p-value of a fully observed test case against the reference sample.
PValueResult outlier_p(const LabeledSample& test, const CalibrationSet& reference, const ScoreFunction& score);

/// Benjamini-Hochberg step-up: reject p <= p_(k*) with k* = max{k : p_(k) <= k q / m}.
BhResult bh_procedure(std::span<const double> pvalues, double q);

/// Conformal p-values of every test against the shared reference, followed by BH.
BhResult screen_batch(const OutlierBatch& batch, const ScoreFunction& score, double q);
BhResult screen_scores(const ReferenceScores& reference, std::span<const double> test_scores, double q);

}  // namespace conformal
