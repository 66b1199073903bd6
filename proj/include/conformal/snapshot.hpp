#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "conformal/core_types.hpp"

namespace conformal::io {

enum class CalibrationMethod { mean_residual, cqr, class_threshold, class_cumulative, one_sided };

std::string to_string(CalibrationMethod m);
CalibrationMethod calibration_method_from_string(const std::string& name);
bool is_classification(CalibrationMethod m);

/// y = intercept + coef . x
struct LinearModel {
    double intercept = 0.0;
    std::vector<double> coef;

    double predict(std::span<const double> x) const;
};

/// Multinomial logistic model: softmax(intercept_k + coef_k . x).
struct SoftmaxModel {
    std::vector<double> intercept;
    std::vector<std::vector<double>> coef;

    std::vector<double> predict(std::span<const double> x) const;
    int num_classes() const { return static_cast<int>(intercept.size()); }
};

/// Model artifact for a calibration method. Which members are set depends on the method:
/// `mean` (mean_residual), `lower`/`upper` (cqr), `softmax` (classification).
struct ModelArtifact {
    std::optional<LinearModel> mean;
    std::optional<LinearModel> lower;
    std::optional<LinearModel> upper;
    std::optional<SoftmaxModel> softmax;
};

ModelArtifact load_model(const std::string& path);
ModelArtifact model_from_json_text(const std::string& text);

/// Calibration snapshot: everything needed to form prediction sets later. Only the
/// sorted score multiset is kept, never the raw rows.
struct Snapshot {
    CalibrationMethod method = CalibrationMethod::one_sided;
    double alpha = 0.1;
    std::vector<double> sorted_scores;
    ExtendedReal threshold;
    int num_classes = 0;
    bool randomize = false;
    std::uint64_t seed = 0;
    std::optional<ModelArtifact> model;

    std::size_t n() const { return sorted_scores.size(); }
};

std::string snapshot_to_json_text(const Snapshot& snapshot);
Snapshot snapshot_from_json_text(const std::string& text);
void save_snapshot(const Snapshot& snapshot, const std::string& path);
Snapshot load_snapshot(const std::string& path);

}  // namespace conformal::io
