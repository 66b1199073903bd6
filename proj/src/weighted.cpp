#include "conformal/weighted.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

namespace conformal {

namespace {

constexpr double kHardTolerance = 1e-6;

std::vector<double> ratio_values(const DensityRatio& ratio, std::span<const std::vector<double>> features,
                                 std::optional<double> clip, bool& clipped) {
    if (!ratio.ratio) throw DomainError("density ratio callback is not provided");
    std::vector<double> r;
    r.reserve(features.size());
    for (const auto& x : features) {
        double v = ratio.ratio(x);
        if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("density ratio must be finite and nonnegative");
        if (clip && v > *clip) {
            v = *clip;
            clipped = true;
        }
        r.push_back(v);
    }
    return r;
}

}  // namespace

WeightVector::WeightVector(std::vector<double> w) : w_(std::move(w)) {
    uniform_ = std::adjacent_find(w_.begin(), w_.end(), std::not_equal_to<>()) == w_.end();
}

WeightVector WeightVector::normalized(std::vector<double> w) {
    if (w.empty()) throw DomainError("empty weight vector");
    double total = 0.0;
    for (double v : w) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("weights must be finite and nonnegative");
        total += v;
    }
    const double dev = std::abs(total - 1.0);
    if (dev > kHardTolerance) throw DomainError("weights sum to " + std::to_string(total));
    if (dev > 0.0)
        for (double& v : w) v /= total;
    return WeightVector(std::move(w));
}

WeightVector WeightVector::from_masses(std::vector<double> masses) {
    if (masses.empty()) throw DomainError("empty weight vector");
    double total = 0.0;
    for (double v : masses) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("weights must be finite and nonnegative");
        total += v;
    }
    if (!(total > 0.0)) throw DomainError("all weights are zero");
    for (double& v : masses) v /= total;
    return WeightVector(std::move(masses));
}

WeightVector WeightVector::uniform(std::size_t n_plus_one) {
    if (n_plus_one == 0) throw DomainError("empty weight vector");
    return WeightVector(std::vector<double>(n_plus_one, 1.0 / static_cast<double>(n_plus_one)));
}

WeightVector permutation_weights_bruteforce(const JointLaw& law, std::span<const LabeledSample> z) {
    if (!law.log_f) throw DomainError("joint law callback is not provided");
    const std::size_t m = z.size();
    if (m == 0) throw DomainError("empty sample");
    if (m > kMaxBruteForcePoints)
        throw DomainError("brute-force permutation weights are limited to " + std::to_string(kMaxBruteForcePoints) +
                          " points; use covariate_shift_weights or precomputed weights");

    std::vector<std::size_t> perm(m);
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<LabeledSample> ordered(m);
    std::vector<double> log_terms;
    std::vector<std::size_t> last;
    do {
        for (std::size_t k = 0; k < m; ++k) ordered[k] = z[perm[k]];
        const double lf = law.log_f(ordered);
        if (std::isnan(lf) || lf == std::numeric_limits<double>::infinity())
            throw DomainError("joint law returned NaN or +inf");
        log_terms.push_back(lf);
        last.push_back(perm.back());
    } while (std::next_permutation(perm.begin(), perm.end()));

    const double max_log = *std::max_element(log_terms.begin(), log_terms.end());
    if (max_log == -std::numeric_limits<double>::infinity())
        throw DomainError("joint law assigns zero mass to every ordering");
    std::vector<double> mass(m, 0.0);
    for (std::size_t t = 0; t < log_terms.size(); ++t) mass[last[t]] += std::exp(log_terms[t] - max_log);
    return WeightVector::from_masses(std::move(mass));
}

WeightVector covariate_shift_weights(const DensityRatio& ratio, std::span<const std::vector<double>> features,
                                     std::optional<double> clip) {
    bool clipped = false;
    auto r = ratio_values(ratio, features, clip, clipped);
    if (std::all_of(r.begin(), r.end(), [](double v) { return v == 0.0; }))
        throw DomainError("all density ratios are zero; test point lies outside the calibration support");
    auto w = WeightVector::from_masses(std::move(r));
    if (clipped) w.mark_clipped();
    return w;
}

double weighted_rank_p(std::span<const double> calibration_scores, double test_score, const WeightVector& weights) {
    if (weights.size() != calibration_scores.size() + 1)
        throw DomainError("weight vector length must equal calibration size + 1");
    if (std::isnan(test_score)) throw DomainError("test score is NaN");
    if (weights.is_uniform()) return rank_p_value(calibration_scores, test_score).value();
    long double p = weights[calibration_scores.size()];
    for (std::size_t i = 0; i < calibration_scores.size(); ++i)
        if (test_score <= calibration_scores[i]) p += weights[i];
    return std::min(static_cast<double>(p), 1.0);
}

double weighted_p(const Outcome& candidate_y, const CalibrationSet& calib, const TestPoint& test,
                  const ScoreFunction& score, const WeightVector& weights) {
    if (weights.size() != calib.size() + 1) throw DomainError("weight vector length must equal calibration size + 1");
    const auto scores = augmented_scores(candidate_y, calib, test, score);
    return weighted_rank_p(scores.calibration, scores.test, weights);
}

PredictionSet weighted_prediction_set(std::span<const Outcome> candidates, const CalibrationSet& calib,
                                      const TestPoint& test, const ScoreFunction& score, const WeightSource& source,
                                      double alpha) {
    check_alpha(alpha);
    if (candidates.empty()) throw DomainError("empty candidate list");

    std::optional<WeightVector> fixed;
    if (const auto* ratio = std::get_if<DensityRatio>(&source)) {
        std::vector<std::vector<double>> features;
        features.reserve(calib.size() + 1);
        for (const auto& z : calib.samples()) features.push_back(z.features);
        features.push_back(test.features);
        fixed = covariate_shift_weights(*ratio, features);
    } else if (const auto* w = std::get_if<WeightVector>(&source)) {
        fixed = *w;
    }

    auto weights_for = [&](const Outcome& y) {
        if (fixed) return *fixed;
        std::vector<LabeledSample> z(calib.samples().begin(), calib.samples().end());
        z.push_back(test.with_outcome(y));
        return permutation_weights_bruteforce(std::get<JointLaw>(source), z);
    };

    const bool categorical = candidates.front().is_category();
    LabelSet labels{{}, categorical ? candidates.front().num_classes() : 0};
    ValueSet values;
    for (const auto& y : candidates) {
        if (y.is_category() != categorical) throw DomainError("candidates mix real and categorical outcomes");
        if (!(weighted_p(y, calib, test, score, weights_for(y)) > alpha)) continue;
        if (categorical)
            labels.labels.push_back(y.label());
        else
            values.values.push_back(y.value());
    }
    if (categorical) return {labels, alpha};
    return {values, alpha};
}

}  // namespace conformal
