#include "conformal/outlier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace conformal {

namespace {

std::vector<double> split_scores(const CalibrationSet& reference, const ScoreFunction& score) {
    if (score.is_full()) throw DomainError("shared reference scores require a split-mode score");
    std::vector<double> s(reference.size());
    for (std::size_t i = 0; i < reference.size(); ++i) s[i] = score(reference[i], {});
    return s;
}

}  // namespace

ReferenceScores::ReferenceScores(const CalibrationSet& reference, const ScoreFunction& split_score)
    : scores_(split_scores(reference, split_score)) {}

PValueResult ReferenceScores::p_value(double test_score) const {
    if (std::isnan(test_score)) throw DomainError("test score is NaN");
    return {scores_.count_at_least(test_score), scores_.size()};
}

PValueResult outlier_p(const LabeledSample& test, const CalibrationSet& reference, const ScoreFunction& score) {
    TestPoint point{test.features, test.tiebreak_u};
    return conformal_p(test.outcome, reference, point, score);
}

BhResult bh_procedure(std::span<const double> pvalues, double q) {
    if (!(q > 0.0 && q < 1.0)) throw DomainError("q must lie in (0,1)");
    for (double p : pvalues)
        if (!(p >= 0.0 && p <= 1.0)) throw DomainError("p-values must lie in [0,1]");
    BhResult out;
    out.q = q;
    out.per_test_p.assign(pvalues.begin(), pvalues.end());
    const std::size_t m = pvalues.size();
    if (m == 0) return out;

    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pvalues[a] < pvalues[b]; });

    std::size_t k_star = 0;
    for (std::size_t k = 1; k <= m; ++k)
        if (pvalues[order[k - 1]] <= static_cast<double>(k) * q / static_cast<double>(m)) k_star = k;
    if (k_star == 0) return out;

    const double cutoff = pvalues[order[k_star - 1]];
    for (std::size_t i = 0; i < m; ++i)
        if (pvalues[i] <= cutoff) out.rejected.push_back(i);
    return out;
}

BhResult screen_scores(const ReferenceScores& reference, std::span<const double> test_scores, double q) {
    std::vector<double> p(test_scores.size());
    for (std::size_t j = 0; j < test_scores.size(); ++j) p[j] = reference.p_value(test_scores[j]).value();
    return bh_procedure(p, q);
}

BhResult screen_batch(const OutlierBatch& batch, const ScoreFunction& score, double q) {
    if (batch.tests.empty()) throw DomainError("outlier batch has no test cases");
    if (score.is_full()) {
        std::vector<double> p(batch.tests.size());
        for (std::size_t j = 0; j < batch.tests.size(); ++j) p[j] = outlier_p(batch.tests[j], batch.reference, score).value();
        return bh_procedure(p, q);
    }
    const ReferenceScores reference(batch.reference, score);
    std::vector<double> test_scores(batch.tests.size());
    for (std::size_t j = 0; j < batch.tests.size(); ++j) test_scores[j] = score(batch.tests[j], {});
    return screen_scores(reference, test_scores, q);
}

}  // namespace conformal
