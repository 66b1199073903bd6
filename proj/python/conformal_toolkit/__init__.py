"""Python bindings for the conformal inference library."""

from ._conformal import (
    PValue,
    bh_procedure,
    categorical_p,
    categorical_prediction_set,
    classification_threshold,
    classification_threshold_set,
    conformal_quantile,
    coverage_fluctuation_sd,
    cqr_interval,
    cumulative_probability_score,
    cumulative_probability_set,
    empirical_quantile,
    mean_residual_interval,
    one_sided_upper_bound,
    rank_p_value,
    regularized_incomplete_beta,
    run_experiment,
    screen_scores,
    select_r_marginal,
    select_r_pac,
    student_t_cdf,
    student_t_quantile,
    tolerance_threshold,
    unseen_label_rule,
    weighted_rank_p,
)

__all__ = [name for name in dir() if not name.startswith("_")]
