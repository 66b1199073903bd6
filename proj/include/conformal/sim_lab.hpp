#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "conformal/categorical.hpp"
#include "conformal/core_types.hpp"
#include "conformal/pvalue_engine.hpp"
#include "conformal/random.hpp"

namespace conformal::sim {

struct NormalSpec {
    double mu = 0.0;
    double sigma = 1.0;
};

struct StudentTSpec {
    double dof = 3.0;
};

struct MixtureComponent {
    double mean = 0.0;
    double variance = 1.0;
    double weight = 1.0;
};

struct NormalMixtureSpec {
    std::vector<MixtureComponent> components;
};

struct MultinomialSpec {
    PopulationPMF pmf;
};

using GeneratorSpec = std::variant<NormalSpec, StudentTSpec, NormalMixtureSpec, MultinomialSpec>;

/// Throws DomainError on sigma/dof <= 0 or mixture weights not summing to one (1e-12).
void validate(const GeneratorSpec& spec);
bool is_continuous(const GeneratorSpec& spec);

/// The three continuous generators and three label distributions used in the
/// reference experiments.
NormalMixtureSpec reference_mixture();
PopulationPMF balanced_pmf();
PopulationPMF moderate_pmf();
PopulationPMF imbalanced_pmf();

enum class Method { conformal, oracle, plugin, parametric_normal, dirichlet_bayes, trivial_randomized };

std::string to_string(Method m);
Method method_from_string(const std::string& name);

struct ExperimentConfig {
    GeneratorSpec generator = NormalSpec{};
    std::vector<std::size_t> n_grid;
    double alpha = 0.1;
    std::size_t replicates = 10000;
    std::uint64_t seed = kDefaultSeed;
    std::vector<Method> methods;
    /// 0 selects the hardware concurrency. Results do not depend on it.
    unsigned threads = 0;
};

/// Throws DomainError for invalid method/generator pairings or sizes.
void validate(const ExperimentConfig& config);

struct MetricRow {
    Method method;
    std::size_t n = 0;
    double coverage = 0.0;
    double coverage_se = 0.0;
    double excess = 0.0;
    double excess_se = 0.0;
};

/// Population CDF and quantile of a continuous generator. Mixture quantiles are
/// found by bisection to 1e-10.
double population_cdf(const GeneratorSpec& spec, double y);
double population_quantile(const GeneratorSpec& spec, double tau);

/// One draw by inverse CDF (mixtures: component index, then the component's inverse CDF).
double sample_continuous(const GeneratorSpec& spec, Stream& stream);
int sample_label(const PopulationPMF& pmf, Stream& stream);

/// Ybar + t_{1 - alpha, n - 1} sd(Y) sqrt(1 + 1/n).
double parametric_normal_bound(const ScoreBag& y_values, double alpha);
/// Q(P_hat; 1 - alpha) without the finite-sample inflation.
double plugin_bound(const ScoreBag& y_values, double alpha);
/// Posterior predictive (1 + n_k) / (K + n) under a uniform Dirichlet prior.
PopulationPMF dirichlet_bayes_predictive(const LabelCounts& counts);
/// Whole space iff u <= 1 - alpha, otherwise empty.
PredictionSet trivial_randomized_set(double u, double alpha);

std::vector<MetricRow> run_continuous_experiment(const ExperimentConfig& config);
std::vector<MetricRow> run_categorical_experiment(const ExperimentConfig& config);
std::vector<MetricRow> run_experiment(const ExperimentConfig& config);

/// JSON config with snake_case keys mirroring ExperimentConfig.
ExperimentConfig config_from_json_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// CSV with columns method,n,coverage,coverage_se,excess,excess_se.
void write_metrics_csv(std::ostream& os, const std::vector<MetricRow>& rows);
void write_metrics_json(std::ostream& os, const std::vector<MetricRow>& rows);

}  // namespace conformal::sim
