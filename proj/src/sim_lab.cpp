#include "conformal/sim_lab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "conformal/pac.hpp"
#include "conformal/parallel.hpp"
#include "conformal/split_conformal.hpp"

namespace conformal::sim {

namespace {

constexpr double kMixtureTolerance = 1e-10;
constexpr double kWeightTolerance = 1e-12;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double normal_quantile(double mu, double sigma, double u) {
    return boost::math::quantile(boost::math::normal_distribution<double>(mu, sigma), u);
}

double student_t_draw(double dof, double u) {
    return boost::math::quantile(boost::math::students_t_distribution<double>(dof), u);
}

// Pairwise summation keeps the reduction independent of the worker layout.
double pairwise_sum(std::span<const double> v) {
    if (v.size() <= 8) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t half = v.size() / 2;
    return pairwise_sum(v.subspan(0, half)) + pairwise_sum(v.subspan(half));
}

struct Accumulator {
    std::vector<double> covered;
    std::vector<double> excess;

    explicit Accumulator(std::size_t replicates) : covered(replicates, 0.0), excess(replicates, 0.0) {}

    MetricRow finish(Method method, std::size_t n) const {
        const auto r = static_cast<double>(covered.size());
        MetricRow row{method, n, 0.0, 0.0, 0.0, 0.0};
        row.coverage = pairwise_sum(covered) / r;
        row.coverage_se = std::sqrt(row.coverage * (1.0 - row.coverage) / r);
        const bool finite = std::all_of(excess.begin(), excess.end(), [](double e) { return std::isfinite(e); });
        if (!finite) {
            const bool any_pos = std::any_of(excess.begin(), excess.end(), [](double e) { return e > 0 && std::isinf(e); });
            const bool any_neg = std::any_of(excess.begin(), excess.end(), [](double e) { return e < 0 && std::isinf(e); });
            row.excess = any_pos && any_neg ? std::numeric_limits<double>::quiet_NaN()
                         : any_pos          ? std::numeric_limits<double>::infinity()
                                            : -std::numeric_limits<double>::infinity();
            row.excess_se = std::numeric_limits<double>::quiet_NaN();
            return row;
        }
        row.excess = pairwise_sum(excess) / r;
        std::vector<double> sq(excess.size());
        for (std::size_t i = 0; i < excess.size(); ++i) sq[i] = (excess[i] - row.excess) * (excess[i] - row.excess);
        const double var = r > 1 ? pairwise_sum(sq) / (r - 1.0) : 0.0;
        row.excess_se = std::sqrt(var / r);
        return row;
    }
};

bool method_allowed(Method m, bool continuous) {
    switch (m) {
        case Method::parametric_normal:
            return continuous;
        case Method::dirichlet_bayes:
            return !continuous;
        default:
            return true;
    }
}

constexpr std::uint64_t kDataTag = 0x64617461ULL;

}  // namespace

void validate(const GeneratorSpec& spec) {
    std::visit(
        [](const auto& g) {
            using T = std::decay_t<decltype(g)>;
            if constexpr (std::is_same_v<T, NormalSpec>) {
                if (!(g.sigma > 0.0)) throw DomainError("normal generator requires sigma > 0");
            } else if constexpr (std::is_same_v<T, StudentTSpec>) {
                if (!(g.dof > 0.0)) throw DomainError("student_t generator requires dof > 0");
            } else if constexpr (std::is_same_v<T, NormalMixtureSpec>) {
                if (g.components.empty()) throw DomainError("mixture needs at least one component");
                double total = 0.0;
                for (const auto& c : g.components) {
                    if (!(c.variance > 0.0)) throw DomainError("mixture component variance must be positive");
                    if (!(c.weight >= 0.0)) throw DomainError("mixture weights must be nonnegative");
                    total += c.weight;
                }
                if (std::abs(total - 1.0) > kWeightTolerance) throw DomainError("mixture weights must sum to one");
            }
        },
        spec);
}

bool is_continuous(const GeneratorSpec& spec) { return !std::holds_alternative<MultinomialSpec>(spec); }

NormalMixtureSpec reference_mixture() { return {{{-2.0, 0.01, 0.09}, {0.0, 1.0, 0.82}, {2.0, 0.01, 0.09}}}; }
PopulationPMF balanced_pmf() { return PopulationPMF({0.2, 0.2, 0.2, 0.2, 0.2}, false); }
PopulationPMF moderate_pmf() { return PopulationPMF({0.4, 0.25, 0.15, 0.12, 0.08}); }
PopulationPMF imbalanced_pmf() { return PopulationPMF({0.75, 0.15, 0.09, 0.01, 0.0}); }

std::string to_string(Method m) {
    switch (m) {
        case Method::conformal: return "conformal";
        case Method::oracle: return "oracle";
        case Method::plugin: return "plugin";
        case Method::parametric_normal: return "parametric_normal";
        case Method::dirichlet_bayes: return "dirichlet_bayes";
        case Method::trivial_randomized: return "trivial_randomized";
    }
    return "unknown";
}

Method method_from_string(const std::string& name) {
    for (Method m : {Method::conformal, Method::oracle, Method::plugin, Method::parametric_normal,
                     Method::dirichlet_bayes, Method::trivial_randomized})
        if (to_string(m) == name) return m;
    throw DomainError("unknown method '" + name + "'");
}

void validate(const ExperimentConfig& config) {
    validate(config.generator);
    if (config.replicates < 1) throw DomainError("replicates must be >= 1");
    if (config.n_grid.empty()) throw DomainError("n_grid is empty");
    if (config.methods.empty()) throw DomainError("no methods requested");
    check_alpha(config.alpha);
    const bool continuous = is_continuous(config.generator);
    for (Method m : config.methods)
        if (!method_allowed(m, continuous))
            throw DomainError("method '" + to_string(m) + "' is not available for this generator");
    for (std::size_t n : config.n_grid) {
        if (n < 1) throw DomainError("sample sizes must be >= 1");
        if (n < 2 && std::find(config.methods.begin(), config.methods.end(), Method::parametric_normal) !=
                         config.methods.end())
            throw DomainError("parametric_normal requires n >= 2");
    }
}

double population_cdf(const GeneratorSpec& spec, double y) {
    return std::visit(
        [y](const auto& g) -> double {
            using T = std::decay_t<decltype(g)>;
            if constexpr (std::is_same_v<T, NormalSpec>) {
                return normal_cdf((y - g.mu) / g.sigma);
            } else if constexpr (std::is_same_v<T, StudentTSpec>) {
                return student_t_cdf(y, g.dof);
            } else if constexpr (std::is_same_v<T, NormalMixtureSpec>) {
                double f = 0.0;
                for (const auto& c : g.components) f += c.weight * normal_cdf((y - c.mean) / std::sqrt(c.variance));
                return f;
            } else {
                throw DomainError("population CDF requires a continuous generator");
            }
        },
        spec);
}

double population_quantile(const GeneratorSpec& spec, double tau) {
    if (!(tau > 0.0 && tau < 1.0)) throw DomainError("quantile level must lie in (0,1)");
    return std::visit(
        [&](const auto& g) -> double {
            using T = std::decay_t<decltype(g)>;
            if constexpr (std::is_same_v<T, NormalSpec>) {
                return normal_quantile(g.mu, g.sigma, tau);
            } else if constexpr (std::is_same_v<T, StudentTSpec>) {
                return boost::math::quantile(boost::math::students_t_distribution<double>(g.dof), tau);
            } else if constexpr (std::is_same_v<T, NormalMixtureSpec>) {
                double lo = -1.0;
                double hi = 1.0;
                while (population_cdf(spec, lo) > tau) lo *= 2.0;
                while (population_cdf(spec, hi) < tau) hi *= 2.0;
                while (hi - lo > kMixtureTolerance) {
                    const double mid = 0.5 * (lo + hi);
                    if (population_cdf(spec, mid) < tau)
                        lo = mid;
                    else
                        hi = mid;
                }
                return 0.5 * (lo + hi);
            } else {
                throw DomainError("population quantile requires a continuous generator");
            }
        },
        spec);
}

double sample_continuous(const GeneratorSpec& spec, Stream& stream) {
    return std::visit(
        [&](const auto& g) -> double {
            using T = std::decay_t<decltype(g)>;
            if constexpr (std::is_same_v<T, NormalSpec>) {
                return normal_quantile(g.mu, g.sigma, stream.uniform());
            } else if constexpr (std::is_same_v<T, StudentTSpec>) {
                return student_t_draw(g.dof, stream.uniform());
            } else if constexpr (std::is_same_v<T, NormalMixtureSpec>) {
                const double pick = stream.uniform();
                const double u = stream.uniform();
                double acc = 0.0;
                for (const auto& c : g.components) {
                    acc += c.weight;
                    if (pick < acc) return normal_quantile(c.mean, std::sqrt(c.variance), u);
                }
                const auto& last = g.components.back();
                return normal_quantile(last.mean, std::sqrt(last.variance), u);
            } else {
                throw DomainError("continuous sampling requires a continuous generator");
            }
        },
        spec);
}

int sample_label(const PopulationPMF& pmf, Stream& stream) {
    const double u = stream.uniform();
    double acc = 0.0;
    const auto probs = pmf.probabilities();
    int last_positive = 1;
    for (std::size_t k = 0; k < probs.size(); ++k) {
        if (probs[k] > 0.0) last_positive = static_cast<int>(k) + 1;
        acc += probs[k];
        if (u < acc) return static_cast<int>(k) + 1;
    }
    return last_positive;
}

double parametric_normal_bound(const ScoreBag& y_values, double alpha) {
    check_alpha(alpha);
    const std::size_t n = y_values.size();
    if (n < 2) throw DomainError("parametric normal bound requires n >= 2");
    const auto v = y_values.values();
    const double nd = static_cast<double>(n);
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / nd;
    double ss = 0.0;
    for (double y : v) ss += (y - mean) * (y - mean);
    const double sd = std::sqrt(ss / (nd - 1.0));
    if (sd == 0.0) return mean;
    return mean + student_t_quantile(1.0 - alpha, nd - 1.0) * sd * std::sqrt(1.0 + 1.0 / nd);
}

double plugin_bound(const ScoreBag& y_values, double alpha) {
    check_alpha(alpha);
    return empirical_quantile(y_values, 1.0 - alpha).value();
}

PopulationPMF dirichlet_bayes_predictive(const LabelCounts& counts) {
    const double denom = static_cast<double>(counts.num_classes()) + static_cast<double>(counts.n());
    std::vector<double> p;
    p.reserve(counts.counts().size());
    for (long long c : counts.counts()) p.push_back((1.0 + static_cast<double>(c)) / denom);
    return PopulationPMF(std::move(p), false);
}

PredictionSet trivial_randomized_set(double u, double alpha) {
    check_alpha(alpha);
    if (!(u >= 0.0 && u <= 1.0)) throw DomainError("u must lie in [0,1]");
    return {Randomized{u <= 1.0 - alpha}, alpha};
}

std::vector<MetricRow> run_continuous_experiment(const ExperimentConfig& config) {
    validate(config);
    if (!is_continuous(config.generator)) throw DomainError("continuous experiment requires a continuous generator");
    const auto& gen = config.generator;
    const double alpha = config.alpha;
    const double oracle_bound = population_quantile(gen, 1.0 - alpha);
    const bool wants_parametric = std::find(config.methods.begin(), config.methods.end(), Method::parametric_normal) !=
                                  config.methods.end();

    std::vector<MetricRow> rows;
    for (std::size_t n : config.n_grid) {
        const double t_factor = wants_parametric ? student_t_quantile(1.0 - alpha, static_cast<double>(n) - 1.0) *
                                                       std::sqrt(1.0 + 1.0 / static_cast<double>(n))
                                                 : 0.0;
        std::vector<Accumulator> acc(config.methods.size(), Accumulator(config.replicates));

        parallel_for(config.replicates, config.threads, [&](std::size_t k) {
            Stream stream(config.seed, {kDataTag, n, k});
            std::vector<double> y(n);
            for (double& v : y) v = sample_continuous(gen, stream);
            const double y_test = sample_continuous(gen, stream);
            const double u_trivial = stream.uniform();
            const ScoreBag bag(std::move(y));

            for (std::size_t m = 0; m < config.methods.size(); ++m) {
                double bound = 0.0;
                switch (config.methods[m]) {
                    case Method::conformal:
                        bound = one_sided_upper_bound(bag, alpha).value();
                        break;
                    case Method::oracle:
                        bound = oracle_bound;
                        break;
                    case Method::plugin:
                        bound = plugin_bound(bag, alpha);
                        break;
                    case Method::parametric_normal: {
                        const auto v = bag.values();
                        const double nd = static_cast<double>(n);
                        const double mean = std::accumulate(v.begin(), v.end(), 0.0) / nd;
                        double ss = 0.0;
                        for (double x : v) ss += (x - mean) * (x - mean);
                        bound = mean + t_factor * std::sqrt(ss / (nd - 1.0));
                        break;
                    }
                    case Method::trivial_randomized:
                        bound = trivial_randomized_set(u_trivial, alpha).contains(Outcome::real(0.0))
                                    ? std::numeric_limits<double>::infinity()
                                    : -std::numeric_limits<double>::infinity();
                        break;
                    case Method::dirichlet_bayes:
                        throw DomainError("dirichlet_bayes is categorical only");
                }
                acc[m].covered[k] = y_test <= bound ? 1.0 : 0.0;
                // An empty trivial set has no upper bound to compare; count it as zero excess.
                acc[m].excess[k] = bound == -std::numeric_limits<double>::infinity() ? 0.0 : bound - oracle_bound;
            }
        });
        for (std::size_t m = 0; m < config.methods.size(); ++m) rows.push_back(acc[m].finish(config.methods[m], n));
    }
    return rows;
}

std::vector<MetricRow> run_categorical_experiment(const ExperimentConfig& config) {
    validate(config);
    const auto* spec = std::get_if<MultinomialSpec>(&config.generator);
    if (spec == nullptr) throw DomainError("categorical experiment requires a multinomial generator");
    const PopulationPMF& pmf = spec->pmf;
    const int K = pmf.num_classes();
    const double alpha = config.alpha;

    std::vector<MetricRow> rows;
    for (std::size_t n : config.n_grid) {
        std::vector<Accumulator> acc(config.methods.size(), Accumulator(config.replicates));

        parallel_for(config.replicates, config.threads, [&](std::size_t k) {
            Stream stream(config.seed, {kDataTag, n, k});
            std::vector<int> labels(n);
            std::vector<double> u(n);
            for (std::size_t i = 0; i < n; ++i) {
                labels[i] = sample_label(pmf, stream);
                u[i] = stream.uniform();
            }
            const int y_test = sample_label(pmf, stream);
            const double u_test = stream.uniform();
            const double u_trivial = stream.uniform();
            const LabelCounts counts(K, labels);
            const auto oracle = oracle_set(pmf, alpha, u_test, true);
            const auto oracle_size = static_cast<double>(oracle.size());
            const Outcome truth = Outcome::category(y_test, K);

            for (std::size_t m = 0; m < config.methods.size(); ++m) {
                PredictionSet set;
                switch (config.methods[m]) {
                    case Method::conformal:
                        set = categorical_prediction_set(K, labels, u, u_test, alpha);
                        break;
                    case Method::oracle:
                        set = oracle;
                        break;
                    case Method::plugin: {
                        std::vector<double> p(static_cast<std::size_t>(K));
                        for (int c = 1; c <= K; ++c)
                            p[static_cast<std::size_t>(c - 1)] =
                                static_cast<double>(counts.count(c)) / static_cast<double>(n);
                        set = oracle_set(PopulationPMF(std::move(p), false), alpha, u_test, true);
                        break;
                    }
                    case Method::dirichlet_bayes:
                        set = oracle_set(dirichlet_bayes_predictive(counts), alpha, u_test, true);
                        break;
                    case Method::trivial_randomized: {
                        const bool full = trivial_randomized_set(u_trivial, alpha).contains(truth);
                        std::vector<int> all;
                        if (full)
                            for (int c = 1; c <= K; ++c) all.push_back(c);
                        set = {LabelSet{all, K}, alpha};
                        break;
                    }
                    case Method::parametric_normal:
                        throw DomainError("parametric_normal is continuous only");
                }
                acc[m].covered[k] = set.contains(truth) ? 1.0 : 0.0;
                acc[m].excess[k] = static_cast<double>(set.size()) - oracle_size;
            }
        });
        for (std::size_t m = 0; m < config.methods.size(); ++m) rows.push_back(acc[m].finish(config.methods[m], n));
    }
    return rows;
}

std::vector<MetricRow> run_experiment(const ExperimentConfig& config) {
    return is_continuous(config.generator) ? run_continuous_experiment(config) : run_categorical_experiment(config);
}

}  // namespace conformal::sim
