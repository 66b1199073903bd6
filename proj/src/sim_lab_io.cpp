#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "conformal/sim_lab.hpp"

namespace conformal::sim {

namespace {

using nlohmann::json;

const std::vector<std::string> kTopLevelKeys = {"name", "generator", "n_grid", "alpha", "replicates",
                                                "seed", "methods",   "threads"};

GeneratorSpec generator_from_json(const json& g) {
    const std::string kind = g.at("kind").get<std::string>();
    if (kind == "normal") return NormalSpec{g.value("mu", 0.0), g.value("sigma", 1.0)};
    if (kind == "student_t") return StudentTSpec{g.at("dof").get<double>()};
    if (kind == "normal_mixture") {
        NormalMixtureSpec spec;
        for (const auto& c : g.at("components"))
            spec.components.push_back(
                {c.at("mean").get<double>(), c.at("variance").get<double>(), c.at("weight").get<double>()});
        return spec;
    }
    if (kind == "multinomial") return MultinomialSpec{PopulationPMF(g.at("pmf").get<std::vector<double>>())};
    throw DomainError("unknown generator kind '" + kind + "'");
}

std::string number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

json number_json(double v) {
    if (std::isfinite(v)) return v;
    return number(v);
}

}  // namespace

ExperimentConfig config_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw DomainError(std::string("malformed experiment config: ") + e.what());
    }
    if (!j.is_object()) throw DomainError("experiment config must be a JSON object");
    for (const auto& [key, _] : j.items())
        if (std::find(kTopLevelKeys.begin(), kTopLevelKeys.end(), key) == kTopLevelKeys.end())
            throw DomainError("unknown config key '" + key + "'");
    try {
        ExperimentConfig c;
        c.generator = generator_from_json(j.at("generator"));
        c.n_grid = j.at("n_grid").get<std::vector<std::size_t>>();
        c.alpha = j.value("alpha", 0.1);
        c.replicates = j.value("replicates", std::size_t{10000});
        c.seed = j.value("seed", c.seed);
        c.threads = j.value("threads", 0u);
        for (const auto& m : j.at("methods")) c.methods.push_back(method_from_string(m.get<std::string>()));
        validate(c);
        return c;
    } catch (const json::exception& e) {
        throw DomainError(std::string("invalid experiment config: ") + e.what());
    }
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DomainError("cannot open config '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return config_from_json_text(buffer.str());
}

void write_metrics_csv(std::ostream& os, const std::vector<MetricRow>& rows) {
    os << "method,n,coverage,coverage_se,excess,excess_se\n";
    for (const auto& r : rows)
        os << to_string(r.method) << ',' << r.n << ',' << number(r.coverage) << ',' << number(r.coverage_se) << ','
           << number(r.excess) << ',' << number(r.excess_se) << '\n';
}

void write_metrics_json(std::ostream& os, const std::vector<MetricRow>& rows) {
    json out = json::array();
    for (const auto& r : rows)
        out.push_back({{"method", to_string(r.method)},
                       {"n", r.n},
                       {"coverage", number_json(r.coverage)},
                       {"coverage_se", number_json(r.coverage_se)},
                       {"excess", number_json(r.excess)},
                       {"excess_se", number_json(r.excess_se)}});
    os << out.dump(2) << '\n';
}

}  // namespace conformal::sim
