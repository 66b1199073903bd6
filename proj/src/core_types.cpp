#include "conformal/core_types.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <mutex>
#include <sstream>

namespace conformal {

namespace {

std::mutex& sink_mutex() {
    static std::mutex m;
    return m;
}

WarningSink& sink() {
    static WarningSink s = [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
    return s;
}

constexpr double kRankSnap = 1e-9;

}  // namespace

void set_warning_sink(WarningSink s) {
    std::lock_guard lock(sink_mutex());
    sink() = std::move(s);
}

void warn(const std::string& message) {
    std::lock_guard lock(sink_mutex());
    if (sink()) sink()(message);
}

Outcome Outcome::real(double value) {
    if (std::isnan(value)) throw DomainError("outcome is NaN");
    return Outcome(value);
}

Outcome Outcome::category(int label, int K) {
    if (K < 1) throw DomainError("number of classes must be positive");
    if (label < 1 || label > K)
        throw DomainError("label " + std::to_string(label) + " outside 1.." + std::to_string(K));
    return Outcome(Category{label, K});
}

double Outcome::value() const {
    if (!is_real()) throw DomainError("categorical outcome has no real value");
    return std::get<double>(value_);
}

int Outcome::label() const {
    if (is_real()) throw DomainError("real outcome has no label");
    return std::get<Category>(value_).label;
}

int Outcome::num_classes() const {
    if (is_real()) throw DomainError("real outcome has no label set");
    return std::get<Category>(value_).K;
}

void LabeledSample::validate() const {
    if (tiebreak_u && !(*tiebreak_u >= 0.0 && *tiebreak_u <= 1.0))
        throw DomainError("tiebreak u must lie in [0,1]");
    for (double f : features)
        if (std::isnan(f)) throw DomainError("feature is NaN");
}

CalibrationSet::CalibrationSet(std::vector<LabeledSample> samples) : samples_(std::move(samples)) {
    if (samples_.empty()) throw DomainError("empty calibration set");
    for (const auto& s : samples_) s.validate();
}

ScoreBag::ScoreBag(std::vector<double> scores) : values_(std::move(scores)) {
    for (double s : values_)
        if (!std::isfinite(s)) throw DomainError("score bag accepts finite values only");
    sorted_ = values_;
    std::sort(sorted_.begin(), sorted_.end());
}

std::size_t ScoreBag::count_at_least(double threshold) const {
    auto it = std::lower_bound(sorted_.begin(), sorted_.end(), threshold);
    return static_cast<std::size_t>(sorted_.end() - it);
}

std::string to_string(const ExtendedReal& x) {
    if (x.is_pos_inf()) return "inf";
    if (x.is_neg_inf()) return "-inf";
    std::ostringstream os;
    os.precision(17);
    os << x.value();
    return os.str();
}

long long ceil_rank(double x) {
    const double r = std::round(x);
    if (std::abs(x - r) <= kRankSnap * std::max(1.0, std::abs(x))) return static_cast<long long>(r);
    return static_cast<long long>(std::ceil(x));
}

long long floor_rank(double x) {
    const double r = std::round(x);
    if (std::abs(x - r) <= kRankSnap * std::max(1.0, std::abs(x))) return static_cast<long long>(r);
    return static_cast<long long>(std::floor(x));
}

ExtendedReal empirical_quantile(const ScoreBag& values, double tau) {
    if (values.empty()) throw DomainError("empirical quantile of an empty bag");
    if (std::isnan(tau) || tau < 0.0) throw DomainError("quantile level must be >= 0");
    const auto n = static_cast<long long>(values.size());
    const long long k = ceil_rank(tau * static_cast<double>(n));
    if (k > n) return ExtendedReal::pos_inf();
    return values.sorted()[static_cast<std::size_t>(std::max(k, 1LL) - 1)];
}

double order_statistic(const ScoreBag& values, std::size_t k) {
    if (k < 1 || k > values.size())
        throw DomainError("order statistic rank " + std::to_string(k) + " outside 1.." +
                          std::to_string(values.size()));
    return values.sorted()[k - 1];
}

}  // namespace conformal
