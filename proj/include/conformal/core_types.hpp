#pragma once

#include <compare>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace conformal {

/// Raised when an input violates a documented precondition.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Raised when a caller-supplied callback or numerical kernel fails.
class OperationalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Warnings are routed through a replaceable sink (stderr by default).
using WarningSink = std::function<void(const std::string&)>;
void set_warning_sink(WarningSink sink);
void warn(const std::string& message);

struct Category {
    int label = 1;  // 1-based
    int K = 1;
    friend bool operator==(const Category&, const Category&) = default;
};

/// Either a real-valued outcome or a category label in {1, ..., K}.
class Outcome {
public:
    static Outcome real(double value);
    static Outcome category(int label, int K);

    bool is_real() const { return std::holds_alternative<double>(value_); }
    bool is_category() const { return !is_real(); }
    double value() const;
    int label() const;
    int num_classes() const;

    friend bool operator==(const Outcome&, const Outcome&) = default;

private:
    explicit Outcome(std::variant<double, Category> v) : value_(v) {}
    std::variant<double, Category> value_;
};

struct LabeledSample {
    std::vector<double> features;
    std::optional<double> tiebreak_u;
    Outcome outcome = Outcome::real(0.0);

    void validate() const;
};

/// Features of a point whose outcome is hypothesized.
struct TestPoint {
    std::vector<double> features;
    std::optional<double> tiebreak_u;

    LabeledSample with_outcome(const Outcome& y) const { return {features, tiebreak_u, y}; }
};

/// Immutable snapshot of the n calibration cases, n >= 1.
class CalibrationSet {
public:
    explicit CalibrationSet(std::vector<LabeledSample> samples);

    std::span<const LabeledSample> samples() const { return samples_; }
    const LabeledSample& operator[](std::size_t i) const { return samples_[i]; }
    std::size_t size() const { return samples_.size(); }

private:
    std::vector<LabeledSample> samples_;
};

/// Multiset of finite scores. Keeps the insertion order and a sorted view.
class ScoreBag {
public:
    ScoreBag() = default;
    explicit ScoreBag(std::vector<double> scores);
    ScoreBag(std::initializer_list<double> scores) : ScoreBag(std::vector<double>(scores)) {}

    std::span<const double> values() const { return values_; }
    std::span<const double> sorted() const { return sorted_; }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }

    /// Number of scores s with s >= threshold.
    std::size_t count_at_least(double threshold) const;

private:
    std::vector<double> values_;
    std::vector<double> sorted_;
};

/// Real number or one of the two infinities, totally ordered.
class ExtendedReal {
public:
    constexpr ExtendedReal() = default;
    constexpr ExtendedReal(double v) : value_(v) {}  // NOLINT: implicit by intent

    static constexpr ExtendedReal pos_inf() { return {std::numeric_limits<double>::infinity()}; }
    static constexpr ExtendedReal neg_inf() { return {-std::numeric_limits<double>::infinity()}; }

    constexpr double value() const { return value_; }
    constexpr bool is_finite() const {
        return value_ != std::numeric_limits<double>::infinity() &&
               value_ != -std::numeric_limits<double>::infinity();
    }
    constexpr bool is_pos_inf() const { return value_ == std::numeric_limits<double>::infinity(); }
    constexpr bool is_neg_inf() const { return value_ == -std::numeric_limits<double>::infinity(); }

    friend constexpr auto operator<=>(const ExtendedReal&, const ExtendedReal&) = default;

private:
    double value_ = 0.0;
};

std::string to_string(const ExtendedReal& x);

/// Smallest integer k with k >= x, where x within a relative 1e-9 of an
/// integer snaps to that integer. Used for every rank of the form ceil(level * n).
long long ceil_rank(double x);
/// Largest integer k with k <= x, with the same snapping as ceil_rank.
long long floor_rank(double x);

/// Left-continuous empirical quantile inf{u : F_n(u) >= tau}.
/// tau = 0 returns the minimum; ranks beyond n return +inf.
ExtendedReal empirical_quantile(const ScoreBag& values, double tau);

/// k-th smallest value counting multiplicity, 1 <= k <= n.
double order_statistic(const ScoreBag& values, std::size_t k);

}  // namespace conformal
