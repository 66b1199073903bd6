#include "conformal/snapshot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace conformal::io {

namespace {

using nlohmann::json;

constexpr const char* kSnapshotFormat = "conformal-snapshot/1";

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DomainError("cannot open '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

json parse(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw DomainError("malformed " + what + ": " + e.what());
    }
}

LinearModel linear_from_json(const json& j) {
    return {j.at("intercept").get<double>(), j.value("coef", std::vector<double>{})};
}

json linear_to_json(const LinearModel& m) { return {{"intercept", m.intercept}, {"coef", m.coef}}; }

json extended_to_json(const ExtendedReal& x) {
    if (x.is_finite()) return x.value();
    return x.is_pos_inf() ? "inf" : "-inf";
}

ExtendedReal extended_from_json(const json& j) {
    if (j.is_number()) return j.get<double>();
    const auto s = j.get<std::string>();
    if (s == "inf") return ExtendedReal::pos_inf();
    if (s == "-inf") return ExtendedReal::neg_inf();
    throw DomainError("invalid threshold '" + s + "'");
}

ModelArtifact model_from_json(const json& j) {
    ModelArtifact m;
    if (j.contains("mean")) m.mean = linear_from_json(j.at("mean"));
    if (j.contains("lower")) m.lower = linear_from_json(j.at("lower"));
    if (j.contains("upper")) m.upper = linear_from_json(j.at("upper"));
    if (j.contains("softmax")) {
        const auto& s = j.at("softmax");
        SoftmaxModel sm{s.at("intercept").get<std::vector<double>>(),
                        s.value("coef", std::vector<std::vector<double>>{})};
        if (sm.intercept.empty()) throw DomainError("softmax model needs at least one class");
        if (!sm.coef.empty() && sm.coef.size() != sm.intercept.size())
            throw DomainError("softmax coef must have one row per class");
        m.softmax = std::move(sm);
    }
    return m;
}

json model_to_json(const ModelArtifact& m) {
    json j = json::object();
    if (m.mean) j["mean"] = linear_to_json(*m.mean);
    if (m.lower) j["lower"] = linear_to_json(*m.lower);
    if (m.upper) j["upper"] = linear_to_json(*m.upper);
    if (m.softmax) j["softmax"] = {{"intercept", m.softmax->intercept}, {"coef", m.softmax->coef}};
    return j;
}

}  // namespace

std::string to_string(CalibrationMethod m) {
    switch (m) {
        case CalibrationMethod::mean_residual: return "mean_residual";
        case CalibrationMethod::cqr: return "cqr";
        case CalibrationMethod::class_threshold: return "class_threshold";
        case CalibrationMethod::class_cumulative: return "class_cumulative";
        case CalibrationMethod::one_sided: return "one_sided";
    }
    return "unknown";
}

CalibrationMethod calibration_method_from_string(const std::string& name) {
    for (auto m : {CalibrationMethod::mean_residual, CalibrationMethod::cqr, CalibrationMethod::class_threshold,
                   CalibrationMethod::class_cumulative, CalibrationMethod::one_sided})
        if (to_string(m) == name) return m;
    throw DomainError("unknown calibration method '" + name + "'");
}

bool is_classification(CalibrationMethod m) {
    return m == CalibrationMethod::class_threshold || m == CalibrationMethod::class_cumulative;
}

double LinearModel::predict(std::span<const double> x) const {
    if (x.size() < coef.size())
        throw DomainError("model expects " + std::to_string(coef.size()) + " features, got " + std::to_string(x.size()));
    double v = intercept;
    for (std::size_t j = 0; j < coef.size(); ++j) v += coef[j] * x[j];
    return v;
}

std::vector<double> SoftmaxModel::predict(std::span<const double> x) const {
    std::vector<double> logits(intercept);
    for (std::size_t k = 0; k < coef.size(); ++k) {
        if (x.size() < coef[k].size()) throw DomainError("softmax model expects more features");
        for (std::size_t j = 0; j < coef[k].size(); ++j) logits[k] += coef[k][j] * x[j];
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double total = 0.0;
    for (double& l : logits) {
        l = std::exp(l - mx);
        total += l;
    }
    for (double& l : logits) l /= total;
    return logits;
}

ModelArtifact model_from_json_text(const std::string& text) {
    try {
        return model_from_json(parse(text, "model artifact"));
    } catch (const json::exception& e) {
        throw DomainError(std::string("invalid model artifact: ") + e.what());
    }
}

ModelArtifact load_model(const std::string& path) { return model_from_json_text(read_file(path)); }

std::string snapshot_to_json_text(const Snapshot& s) {
    json j = {{"format", kSnapshotFormat},
              {"method", to_string(s.method)},
              {"alpha", s.alpha},
              {"n", s.n()},
              {"sorted_scores", s.sorted_scores},
              {"threshold", extended_to_json(s.threshold)},
              {"num_classes", s.num_classes},
              {"randomize", s.randomize},
              {"seed", s.seed}};
    j["model"] = s.model ? model_to_json(*s.model) : json(nullptr);
    return j.dump(2) + "\n";
}

Snapshot snapshot_from_json_text(const std::string& text) {
    const json j = parse(text, "snapshot");
    try {
        if (j.value("format", std::string{}) != kSnapshotFormat) throw DomainError("not a calibration snapshot");
        Snapshot s;
        s.method = calibration_method_from_string(j.at("method").get<std::string>());
        s.alpha = j.at("alpha").get<double>();
        s.sorted_scores = j.at("sorted_scores").get<std::vector<double>>();
        s.threshold = extended_from_json(j.at("threshold"));
        s.num_classes = j.value("num_classes", 0);
        s.randomize = j.value("randomize", false);
        s.seed = j.value("seed", std::uint64_t{0});
        if (j.contains("model") && !j.at("model").is_null()) s.model = model_from_json(j.at("model"));
        if (s.sorted_scores.empty()) throw DomainError("snapshot has no scores");
        if (j.at("n").get<std::size_t>() != s.sorted_scores.size()) throw DomainError("snapshot n mismatch");
        if (!std::is_sorted(s.sorted_scores.begin(), s.sorted_scores.end()))
            throw DomainError("snapshot scores are not sorted");
        return s;
    } catch (const json::exception& e) {
        throw DomainError(std::string("invalid snapshot: ") + e.what());
    }
}

void save_snapshot(const Snapshot& snapshot, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DomainError("cannot write '" + path + "'");
    out << snapshot_to_json_text(snapshot);
}

Snapshot load_snapshot(const std::string& path) { return snapshot_from_json_text(read_file(path)); }

}  // namespace conformal::io
