#include "conformal/categorical.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace conformal {

namespace {

constexpr double kPmfTolerance = 1e-12;
// Prefix masses are compared to 1 - alpha with this slack so that exact
// decimal masses such as 0.3 + 0.2 + 0.2 + 0.2 still reach 0.9.
constexpr double kMassSlack = 1e-12;

void check_label(int label, int K) {
    if (label < 1 || label > K)
        throw DomainError("label " + std::to_string(label) + " outside 1.." + std::to_string(K));
}

void check_u(double u) {
    if (!(u >= 0.0 && u <= 1.0)) throw DomainError("u must lie in [0,1]");
}

// Shared arithmetic for the multinomial score: -(2 c + u) / (2 (n + 1)).
double score_from_count(long long count_with_hypothesis, double u, long long n_plus_one) {
    return -(2.0 * static_cast<double>(count_with_hypothesis) + u) / (2.0 * static_cast<double>(n_plus_one));
}

std::vector<int> decreasing_order(std::span<const double> probs) {
    std::vector<int> order(probs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return probs[a] > probs[b]; });
    return order;
}

}  // namespace

LabelCounts::LabelCounts(std::vector<long long> counts) : counts_(std::move(counts)) {
    if (counts_.empty()) throw DomainError("number of classes must be positive");
    for (long long c : counts_) {
        if (c < 0) throw DomainError("label counts must be nonnegative");
        n_ += c;
    }
}

LabelCounts::LabelCounts(int K, std::span<const int> labels) {
    if (K < 1) throw DomainError("number of classes must be positive");
    counts_.assign(static_cast<std::size_t>(K), 0);
    for (int y : labels) {
        check_label(y, K);
        ++counts_[static_cast<std::size_t>(y - 1)];
    }
    n_ = static_cast<long long>(labels.size());
}

LabelCounts LabelCounts::from_counts(std::vector<long long> counts) { return LabelCounts(std::move(counts)); }

long long LabelCounts::count(int label) const {
    check_label(label, num_classes());
    return counts_[static_cast<std::size_t>(label - 1)];
}

long long LabelCounts::labels_with_count(long long k) const {
    return std::count(counts_.begin(), counts_.end(), k);
}

PopulationPMF::PopulationPMF(std::vector<double> probabilities, bool warn_on_ties) : probs_(std::move(probabilities)) {
    if (probs_.empty()) throw DomainError("empty probability vector");
    double total = 0.0;
    for (double p : probs_) {
        if (!(p >= 0.0) || !std::isfinite(p)) throw DomainError("probabilities must be finite and nonnegative");
        total += p;
    }
    if (std::abs(total - 1.0) > kPmfTolerance) throw DomainError("probabilities do not sum to one");
    auto sorted = probs_;
    std::sort(sorted.begin(), sorted.end());
    has_ties_ = std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end();
    if (has_ties_ && warn_on_ties) warn("population probabilities contain ties; ordering falls back to label index");
}

double multinomial_score(int label_k, double u, int hypothesized_y, const LabelCounts& counts) {
    check_label(label_k, counts.num_classes());
    check_label(hypothesized_y, counts.num_classes());
    check_u(u);
    const long long c = counts.count(label_k) + (label_k == hypothesized_y ? 1 : 0);
    return score_from_count(c, u, counts.n() + 1);
}

ScoreFunction multinomial_score_function(int K) {
    if (K < 1) throw DomainError("number of classes must be positive");
    return ScoreFunction::full([K](const LabeledSample& z, std::span<const LabeledSample> bag) {
        const int k = z.outcome.label();
        check_label(k, K);
        double u = 0.0;
        if (z.tiebreak_u)
            u = *z.tiebreak_u;
        else if (!z.features.empty())
            u = z.features.front();
        check_u(u);
        long long c = 0;
        for (const auto& other : bag)
            if (other.outcome.label() == k) ++c;
        return score_from_count(c, u, static_cast<long long>(bag.size()));
    });
}

PValueResult categorical_p_closed_form(int candidate_y, int K, std::span<const int> observed_labels,
                                       std::span<const double> u_values, double u_test) {
    if (observed_labels.size() != u_values.size()) throw DomainError("one u value per observation is required");
    check_label(candidate_y, K);
    check_u(u_test);
    for (double u : u_values) check_u(u);
    const LabelCounts counts(K, observed_labels);
    const long long n_y = counts.count(candidate_y);

    // Observations whose label is strictly less frequent than y would be in D(y).
    long long rank = -n_y;
    for (long long k = 1; k <= n_y; ++k) rank += k * counts.labels_with_count(k);

    // Ties with the test score are resolved by the uniform tie-breakers.
    for (std::size_t i = 0; i < observed_labels.size(); ++i) {
        const int yi = observed_labels[i];
        const bool in_tie_group = yi == candidate_y || counts.count(yi) == n_y + 1;
        if (in_tie_group && u_test >= u_values[i]) ++rank;
    }
    return {static_cast<std::size_t>(rank), observed_labels.size()};
}

bool unseen_label_rule(std::span<const int> observed_labels, double alpha) {
    check_alpha(alpha);
    int K = 1;
    for (int y : observed_labels) K = std::max(K, y);
    const LabelCounts counts(K, observed_labels);
    const double n = static_cast<double>(observed_labels.size());
    return counts.labels_with_count(1) >= floor_rank(alpha * (n + 1.0));
}

PredictionSet categorical_prediction_set(int K, std::span<const int> observed_labels,
                                         std::span<const double> u_values, double u_test, double alpha) {
    check_alpha(alpha);
    LabelSet set{{}, K};
    for (int y = 1; y <= K; ++y)
        if (categorical_p_closed_form(y, K, observed_labels, u_values, u_test).exceeds(alpha)) set.labels.push_back(y);
    return {set, alpha};
}

double oracle_p(const PopulationPMF& pmf, int label, double u) {
    check_label(label, pmf.num_classes());
    check_u(u);
    const auto probs = pmf.probabilities();
    const auto order = decreasing_order(probs);
    double tail = 0.0;
    bool after = false;
    for (int k : order) {
        if (after) tail += probs[static_cast<std::size_t>(k)];
        if (k == label - 1) after = true;
    }
    return tail + pmf[label] * u;
}

PredictionSet oracle_set(const PopulationPMF& pmf, double alpha, double u, bool randomized) {
    check_alpha(alpha);
    const int K = pmf.num_classes();
    LabelSet set{{}, K};
    if (randomized) {
        for (int y = 1; y <= K; ++y)
            if (oracle_p(pmf, y, u) > alpha) set.labels.push_back(y);
        return {set, alpha};
    }
    const auto probs = pmf.probabilities();
    double mass = 0.0;
    for (int k : decreasing_order(probs)) {
        if (mass >= 1.0 - alpha - kMassSlack) break;
        set.labels.push_back(k + 1);
        mass += probs[static_cast<std::size_t>(k)];
    }
    std::sort(set.labels.begin(), set.labels.end());
    return {set, alpha};
}

}  // namespace conformal
