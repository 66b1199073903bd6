#include "conformal/pac.hpp"

#include <math.h>

#include <cmath>
#include <limits>

namespace conformal {

namespace {

constexpr int kMaxTerms = 500;
constexpr double kCfEpsilon = 1e-16;
constexpr double kTiny = 1e-300;

double log_beta(double a, double b) {
    int sign = 0;
    return ::lgamma_r(a, &sign) + ::lgamma_r(b, &sign) - ::lgamma_r(a + b, &sign);
}

// Continued fraction for I_x(a, b) / front, valid (fast) for x < (a + 1) / (a + b + 2).
double beta_continued_fraction(double x, double a, double b) {
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxTerms; ++m) {
        const double dm = m;
        const double m2 = 2.0 * dm;
        double aa = dm * (b - dm) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + dm) * (qab + dm) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kCfEpsilon) return h;
    }
    throw OperationalError("incomplete beta continued fraction did not converge");
}

}  // namespace

PacTarget::PacTarget(double a, double d) : alpha(a), delta(d) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0,1)");
    if (!(delta > 0.0 && delta < 1.0)) throw DomainError("delta must lie in (0,1)");
}

ToleranceThreshold tolerance_threshold(const ScoreBag& scores, std::size_t r) {
    const std::size_t n = scores.size();
    if (n == 0 || r > n - 1) throw DomainError("r must lie in [0, n - 1]");
    return {r, order_statistic(scores, n - r), false};
}

ToleranceThreshold tolerance_threshold(const ScoreBag& scores, const RSelection& selection) {
    if (!selection.feasible) return {};
    return tolerance_threshold(scores, selection.r);
}

double regularized_incomplete_beta(double x, double a, double b) {
    if (!(x >= 0.0 && x <= 1.0)) throw DomainError("incomplete beta requires x in [0,1]");
    if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b))
        throw DomainError("incomplete beta requires positive finite a and b");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double log_front = a * std::log(x) + b * std::log1p(-x) - log_beta(a, b);
    if (x < (a + 1.0) / (a + b + 2.0)) return std::exp(log_front) * beta_continued_fraction(x, a, b) / a;
    return 1.0 - std::exp(log_front) * beta_continued_fraction(1.0 - x, b, a) / b;
}

double student_t_cdf(double t, double dof) {
    if (!(dof > 0.0)) throw DomainError("degrees of freedom must be positive");
    if (std::isnan(t)) throw DomainError("t is NaN");
    if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
    const double tail = 0.5 * regularized_incomplete_beta(dof / (dof + t * t), 0.5 * dof, 0.5);
    return t >= 0.0 ? 1.0 - tail : tail;
}

double student_t_quantile(double p, double dof) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("quantile level must lie in (0,1)");
    if (!(dof > 0.0)) throw DomainError("degrees of freedom must be positive");
    if (p == 0.5) return 0.0;
    if (p < 0.5) return -student_t_quantile(1.0 - p, dof);
    double lo = 0.0;
    double hi = 1.0;
    while (student_t_cdf(hi, dof) < p) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e300) throw OperationalError("t quantile bracket failed");
    }
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (student_t_cdf(mid, dof) < p)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

RSelection select_r_marginal(std::size_t n, double alpha) {
    if (n == 0) throw DomainError("n must be positive");
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0,1)");
    const long long rank = ceil_rank((1.0 - alpha) * static_cast<double>(n + 1));
    if (rank > static_cast<long long>(n)) return {false, 0, n, 0.0};
    return {true, n - static_cast<std::size_t>(std::max(rank, 1LL)), n, 0.0};
}

RSelection select_r_pac(std::size_t n, const PacTarget& target) {
    if (n == 0) throw DomainError("n must be positive");
    const auto nd = static_cast<double>(n);
    auto achieved = [&](std::size_t r) {
        return regularized_incomplete_beta(target.alpha, static_cast<double>(r) + 1.0, nd - static_cast<double>(r));
    };
    const double goal = 1.0 - target.delta;
    if (achieved(0) < goal) return {false, 0, n, achieved(0)};
    // achieved(r) decreases in r: binary search for the last r meeting the goal.
    std::size_t lo = 0;
    std::size_t hi = n - 1;
    while (lo < hi) {
        const std::size_t mid = lo + (hi - lo + 1) / 2;
        if (achieved(mid) >= goal)
            lo = mid;
        else
            hi = mid - 1;
    }
    return {true, lo, n, achieved(lo)};
}

double coverage_fluctuation_sd(std::size_t n, double alpha) {
    if (n == 0) throw DomainError("n must be positive");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("alpha must lie in [0,1]");
    return std::sqrt(alpha * (1.0 - alpha) / static_cast<double>(n));
}

}  // namespace conformal
