#pragma once

#include <cstddef>

#include "conformal/core_types.hpp"

namespace conformal {

/// Target for calibration-conditional coverage: P[coverage >= 1 - alpha] >= 1 - delta.
struct PacTarget {
    double alpha;
    double delta;

    PacTarget(double alpha, double delta);
};

/// Choice of r for the tolerance set {y : s(x, y) <= S_(n - r)}. When no r works the
/// selection is infeasible and the set is the whole outcome space.
struct RSelection {
    bool feasible = false;
    std::size_t r = 0;
    std::size_t n = 0;
    /// P[Beta(r + 1, n - r) <= alpha] at the chosen r (PAC selector only).
    double achieved = 0.0;
};

struct ToleranceThreshold {
    std::size_t r = 0;
    ExtendedReal threshold = ExtendedReal::pos_inf();
    bool infeasible = true;
};

/// S_(n - r), for 0 <= r <= n - 1.
ToleranceThreshold tolerance_threshold(const ScoreBag& scores, std::size_t r);
/// As above, or +inf with the infeasible flag when the selection is infeasible.
ToleranceThreshold tolerance_threshold(const ScoreBag& scores, const RSelection& selection);

/// Regularized incomplete beta I_x(a, b), evaluated by a modified-Lentz continued
/// fraction (absolute error below 1e-12, at most 500 terms).
double regularized_incomplete_beta(double x, double a, double b);

/// CDF and quantile of Student's t with `dof` degrees of freedom, built on the
/// incomplete beta above.
double student_t_cdf(double t, double dof);
double student_t_quantile(double p, double dof);

/// r = n - ceil((1 - alpha)(n + 1)); infeasible when that rank exceeds n.
RSelection select_r_marginal(std::size_t n, double alpha);

/// Largest r in [0, n - 1] with I_alpha(r + 1, n - r) >= 1 - delta.
RSelection select_r_pac(std::size_t n, const PacTarget& target);

/// sqrt(alpha (1 - alpha) / n): typical spread of the conditional coverage.
double coverage_fluctuation_sd(std::size_t n, double alpha);

}  // namespace conformal
