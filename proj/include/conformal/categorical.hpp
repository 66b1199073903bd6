#pragma once

#include <span>
#include <vector>

#include "conformal/core_types.hpp"
#include "conformal/pvalue_engine.hpp"

namespace conformal {

/// Label frequencies n_1, ..., n_K of an observed sample (labels 1-based).
class LabelCounts {
public:
    LabelCounts(int K, std::span<const int> labels);
    static LabelCounts from_counts(std::vector<long long> counts);

    int num_classes() const { return static_cast<int>(counts_.size()); }
    long long n() const { return n_; }
    long long count(int label) const;
    std::span<const long long> counts() const { return counts_; }
    /// |Gamma_k|: number of labels observed exactly k times.
    long long labels_with_count(long long k) const;

private:
    explicit LabelCounts(std::vector<long long> counts);
    std::vector<long long> counts_;
    long long n_ = 0;
};

/// Population label distribution (pi*_1, ..., pi*_K).
class PopulationPMF {
public:
    /// Requires nonnegative entries summing to one within 1e-12. Equal entries
    /// trigger a warning unless `warn_on_ties` is false.
    explicit PopulationPMF(std::vector<double> probabilities, bool warn_on_ties = true);

    int num_classes() const { return static_cast<int>(probs_.size()); }
    std::span<const double> probabilities() const { return probs_; }
    double operator[](int label) const { return probs_[static_cast<std::size_t>(label - 1)]; }
    bool has_ties() const { return has_ties_; }

private:
    std::vector<double> probs_;
    bool has_ties_ = false;
};

/// s((u, k); D(y)) = -pi_hat_k(y) - (u / 2) / (n + 1), with pi_hat_k(y) = (n_k + 1{k = y}) / (n + 1).
double multinomial_score(int label_k, double u, int hypothesized_y, const LabelCounts& counts);

/// The same score as a full-mode ScoreFunction over K labels. Reads u from each
/// sample's tiebreak_u (or its first feature) and the counts from the bag.
ScoreFunction multinomial_score_function(int K);

/// Closed-form p-value of the multinomial score for candidate label y.
PValueResult categorical_p_closed_form(int candidate_y, int K, std::span<const int> observed_labels,
                                       std::span<const double> u_values, double u_test);

/// True iff an unseen label can enter the prediction set: |Gamma_1| >= floor(alpha (n + 1)).
bool unseen_label_rule(std::span<const int> observed_labels, double alpha);

/// Conformal label set {y : p(y) > alpha} from the closed form.
PredictionSet categorical_prediction_set(int K, std::span<const int> observed_labels,
                                         std::span<const double> u_values, double u_test, double alpha);

/// p*(y, u) = sum of pi* over labels ranked after y, plus pi*_y * u.
double oracle_p(const PopulationPMF& pmf, int label, double u);

/// Randomized: {y : p*(y, u) > alpha}. Otherwise the shortest prefix of labels in
/// decreasing probability whose mass reaches 1 - alpha.
PredictionSet oracle_set(const PopulationPMF& pmf, double alpha, double u, bool randomized);

}  // namespace conformal
