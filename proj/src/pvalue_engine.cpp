#include "conformal/pvalue_engine.hpp"

#include <algorithm>
#include <cmath>
#include <exception>

#include "conformal/random.hpp"

namespace conformal {

ScoreFunction ScoreFunction::split(SplitFn fn) {
    if (!fn) throw DomainError("empty split score callback");
    return ScoreFunction(std::move(fn));
}

ScoreFunction ScoreFunction::full(FullFn fn) {
    if (!fn) throw DomainError("empty full score callback");
    return ScoreFunction(std::move(fn));
}

double ScoreFunction::operator()(const LabeledSample& point, std::span<const LabeledSample> bag) const {
    double s = 0.0;
    try {
        if (const auto* f = std::get_if<SplitFn>(&fn_))
            s = (*f)(point);
        else
            s = std::get<FullFn>(fn_)(point, bag);
    } catch (const DomainError&) {
        throw;
    } catch (const std::exception& e) {
        throw OperationalError(std::string("score evaluation failed: ") + e.what());
    }
    if (std::isnan(s)) throw DomainError("score evaluated to NaN");
    return s;
}

bool PValueResult::exceeds(double alpha) const {
    return static_cast<long long>(numerator()) > floor_rank(alpha * static_cast<double>(denominator()));
}

bool PredictionSet::contains(const Outcome& y) const {
    return std::visit(
        [&](const auto& r) -> bool {
            using T = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<T, LabelSet>) {
                return y.is_category() && std::find(r.labels.begin(), r.labels.end(), y.label()) != r.labels.end();
            } else if constexpr (std::is_same_v<T, ValueSet>) {
                return y.is_real() && std::find(r.values.begin(), r.values.end(), y.value()) != r.values.end();
            } else if constexpr (std::is_same_v<T, Interval>) {
                if (r.empty || !y.is_real()) return false;
                return r.lower <= ExtendedReal(y.value()) && ExtendedReal(y.value()) <= r.upper;
            } else {
                return r.full;
            }
        },
        region);
}

long long PredictionSet::size() const {
    return std::visit(
        [](const auto& r) -> long long {
            using T = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<T, LabelSet>) {
                return static_cast<long long>(r.labels.size());
            } else if constexpr (std::is_same_v<T, ValueSet>) {
                return static_cast<long long>(r.values.size());
            } else if constexpr (std::is_same_v<T, Interval>) {
                return r.empty ? 0 : -1;
            } else {
                return r.full ? -1 : 0;
            }
        },
        region);
}

void check_alpha(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0,1)");
}

AugmentedScores augmented_scores(const Outcome& candidate_y, const CalibrationSet& calib,
                                 const TestPoint& test, const ScoreFunction& score) {
    const std::size_t n = calib.size();
    AugmentedScores out;
    out.calibration.resize(n);
    const LabeledSample test_sample = test.with_outcome(candidate_y);
    test_sample.validate();
    if (!score.is_full()) {
        for (std::size_t i = 0; i < n; ++i) out.calibration[i] = score(calib[i], {});
        out.test = score(test_sample, {});
        return out;
    }
    std::vector<LabeledSample> bag(calib.samples().begin(), calib.samples().end());
    bag.push_back(test_sample);
    for (std::size_t i = 0; i < n; ++i) out.calibration[i] = score(bag[i], bag);
    out.test = score(bag[n], bag);
    return out;
}

PValueResult rank_p_value(std::span<const double> calibration_scores, double test_score) {
    if (std::isnan(test_score)) throw DomainError("test score is NaN");
    std::size_t count = 0;
    for (double s : calibration_scores) {
        if (std::isnan(s)) throw DomainError("calibration score is NaN");
        if (test_score <= s) ++count;
    }
    return {count, calibration_scores.size()};
}

PValueResult conformal_p(const Outcome& candidate_y, const CalibrationSet& calib, const TestPoint& test,
                         const ScoreFunction& score) {
    const auto scores = augmented_scores(candidate_y, calib, test, score);
    return rank_p_value(scores.calibration, scores.test);
}

PredictionSet prediction_set_by_inversion(std::span<const Outcome> candidates, const CalibrationSet& calib,
                                          const TestPoint& test, const ScoreFunction& score, double alpha) {
    check_alpha(alpha);
    if (candidates.empty()) throw DomainError("empty candidate list");

    // Split scores of the calibration points do not depend on the candidate.
    std::vector<double> split_calib;
    if (!score.is_full()) {
        split_calib.resize(calib.size());
        for (std::size_t i = 0; i < calib.size(); ++i) split_calib[i] = score(calib[i], {});
    }

    auto p_of = [&](const Outcome& y) {
        if (score.is_full()) return conformal_p(y, calib, test, score);
        const LabeledSample t = test.with_outcome(y);
        t.validate();
        return rank_p_value(split_calib, score(t, {}));
    };

    const bool categorical = candidates.front().is_category();
    LabelSet labels;
    ValueSet values;
    for (const auto& y : candidates) {
        if (y.is_category() != categorical) throw DomainError("candidates mix real and categorical outcomes");
        if (!p_of(y).exceeds(alpha)) continue;
        if (categorical) {
            labels.labels.push_back(y.label());
            labels.K = y.num_classes();
        } else {
            values.values.push_back(y.value());
        }
    }
    if (categorical) {
        labels.K = candidates.front().num_classes();
        return {labels, alpha};
    }
    return {values, alpha};
}

ScoreBag add_tiebreak_noise(const ScoreBag& scores, double epsilon, std::uint64_t seed) {
    if (!(epsilon > 0.0)) throw DomainError("tie-break epsilon must be positive");
    Stream stream(seed, {0x7469656272656b00ULL});
    std::vector<double> out(scores.values().begin(), scores.values().end());
    for (double& s : out) s += epsilon * stream.uniform();
    return ScoreBag(std::move(out));
}

}  // namespace conformal
