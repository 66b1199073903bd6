#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "conformal/categorical.hpp"
#include "conformal/outlier.hpp"
#include "conformal/pac.hpp"
#include "conformal/pvalue_engine.hpp"
#include "conformal/sim_lab.hpp"
#include "conformal/split_conformal.hpp"
#include "conformal/weighted.hpp"

namespace py = pybind11;
using namespace conformal;

namespace {

py::tuple interval_tuple(const PredictionSet& set) {
    const auto& iv = set.interval();
    return py::make_tuple(iv.lower.value(), iv.upper.value(), iv.empty);
}

py::dict metric_dict(const sim::MetricRow& r) {
    py::dict d;
    d["method"] = sim::to_string(r.method);
    d["n"] = r.n;
    d["coverage"] = r.coverage;
    d["coverage_se"] = r.coverage_se;
    d["excess"] = r.excess;
    d["excess_se"] = r.excess_se;
    return d;
}

}  // namespace

PYBIND11_MODULE(_conformal, m) {
    m.doc() = "Conformal prediction: p-values, prediction sets, calibration and simulation";

    py::class_<PValueResult>(m, "PValue")
        .def(py::init<std::size_t, std::size_t>(), py::arg("rank_count"), py::arg("n"))
        .def_readonly("rank_count", &PValueResult::rank_count)
        .def_readonly("n", &PValueResult::n)
        .def_property_readonly("numerator", &PValueResult::numerator)
        .def_property_readonly("denominator", &PValueResult::denominator)
        .def_property_readonly("value", &PValueResult::value)
        .def("exceeds", &PValueResult::exceeds, py::arg("alpha"))
        .def("__float__", &PValueResult::value)
        .def("__eq__", [](const PValueResult& a, const PValueResult& b) { return a == b; })
        .def("__repr__", [](const PValueResult& p) {
            return "PValue(" + std::to_string(p.numerator()) + "/" + std::to_string(p.denominator()) + ")";
        });

    // Ranks and quantiles
    m.def(
        "rank_p_value",
        [](const std::vector<double>& scores, double test) { return rank_p_value(scores, test); },
        py::arg("calibration_scores"), py::arg("test_score"));
    m.def(
        "empirical_quantile",
        [](const std::vector<double>& v, double tau) { return empirical_quantile(ScoreBag(v), tau).value(); },
        py::arg("values"), py::arg("tau"));

    // Split conformal thresholds and sets
    m.def(
        "conformal_quantile", [](const std::vector<double>& s, double a) { return conformal_quantile(ScoreBag(s), a).value(); },
        py::arg("scores"), py::arg("alpha"));
    m.def(
        "one_sided_upper_bound",
        [](const std::vector<double>& y, double a) { return one_sided_upper_bound(ScoreBag(y), a).value(); },
        py::arg("y_values"), py::arg("alpha"));
    m.def(
        "classification_threshold",
        [](const std::vector<double>& s, double a) { return classification_threshold(ScoreBag(s), a).value(); },
        py::arg("scores"), py::arg("alpha"));
    m.def(
        "mean_residual_interval",
        [](double prediction, const std::vector<double>& residuals, double alpha) {
            return interval_tuple(mean_residual_interval(prediction, ScoreBag(residuals), alpha));
        },
        py::arg("prediction"), py::arg("residuals"), py::arg("alpha"),
        "Returns (lower, upper, empty).");
    m.def(
        "cqr_interval",
        [](double lo, double hi, const std::vector<double>& scores, double alpha) {
            return interval_tuple(cqr_interval(lo, hi, ScoreBag(scores), alpha));
        },
        py::arg("q_lo"), py::arg("q_hi"), py::arg("scores"), py::arg("alpha"), "Returns (lower, upper, empty).");
    m.def(
        "classification_threshold_set",
        [](const std::vector<double>& probs, double threshold, double alpha) {
            return classification_threshold_set(probs, ExtendedReal(threshold), alpha).label_set().labels;
        },
        py::arg("probs"), py::arg("threshold"), py::arg("alpha"));
    m.def(
        "cumulative_probability_score",
        [](const std::vector<double>& probs, int label, std::optional<double> u) {
            return cumulative_probability_score(probs, label, u);
        },
        py::arg("probs"), py::arg("label"), py::arg("u") = py::none());
    m.def(
        "cumulative_probability_set",
        [](const std::vector<double>& probs, double threshold, std::optional<double> u, double alpha) {
            return cumulative_probability_set(probs, ExtendedReal(threshold), u, alpha).label_set().labels;
        },
        py::arg("probs"), py::arg("threshold"), py::arg("u"), py::arg("alpha"));

    // Categorical outcomes without features
    m.def(
        "categorical_p",
        [](int y, int K, const std::vector<int>& labels, const std::vector<double>& u, double u_test) {
            return categorical_p_closed_form(y, K, labels, u, u_test);
        },
        py::arg("y"), py::arg("K"), py::arg("labels"), py::arg("u"), py::arg("u_test"));
    m.def(
        "categorical_prediction_set",
        [](int K, const std::vector<int>& labels, const std::vector<double>& u, double u_test, double alpha) {
            return categorical_prediction_set(K, labels, u, u_test, alpha).label_set().labels;
        },
        py::arg("K"), py::arg("labels"), py::arg("u"), py::arg("u_test"), py::arg("alpha"));
    m.def(
        "unseen_label_rule", [](const std::vector<int>& labels, double alpha) { return unseen_label_rule(labels, alpha); },
        py::arg("labels"), py::arg("alpha"));

    // Weighted conformal
    m.def(
        "weighted_rank_p",
        [](const std::vector<double>& scores, double test, const std::vector<double>& masses) {
            return weighted_rank_p(scores, test, WeightVector::from_masses(masses));
        },
        py::arg("calibration_scores"), py::arg("test_score"), py::arg("masses"),
        "Weighted p-value; `masses` has n + 1 nonnegative entries (test last) and is normalized.");

    // Tolerance regions and PAC calibration
    m.def("regularized_incomplete_beta", &regularized_incomplete_beta, py::arg("x"), py::arg("a"), py::arg("b"));
    m.def("student_t_cdf", &student_t_cdf, py::arg("t"), py::arg("dof"));
    m.def("student_t_quantile", &student_t_quantile, py::arg("p"), py::arg("dof"));
    m.def(
        "select_r_pac",
        [](std::size_t n, double alpha, double delta) -> py::object {
            const auto s = select_r_pac(n, PacTarget(alpha, delta));
            if (!s.feasible) return py::none();
            return py::make_tuple(s.r, s.achieved);
        },
        py::arg("n"), py::arg("alpha"), py::arg("delta"), "Returns (r, achieved) or None when infeasible.");
    m.def(
        "select_r_marginal",
        [](std::size_t n, double alpha) -> py::object {
            const auto s = select_r_marginal(n, alpha);
            if (!s.feasible) return py::none();
            return py::int_(s.r);
        },
        py::arg("n"), py::arg("alpha"));
    m.def(
        "tolerance_threshold",
        [](const std::vector<double>& scores, std::size_t r) {
            return tolerance_threshold(ScoreBag(scores), r).threshold.value();
        },
        py::arg("scores"), py::arg("r"));
    m.def("coverage_fluctuation_sd", &coverage_fluctuation_sd, py::arg("n"), py::arg("alpha"));

    // Outlier screening
    m.def(
        "bh_procedure",
        [](const std::vector<double>& p, double q) { return bh_procedure(p, q).rejected; }, py::arg("pvalues"),
        py::arg("q"));
    m.def(
        "screen_scores",
        [](const std::vector<double>& reference, const std::vector<double>& tests, double q) {
            const auto r = screen_scores(ReferenceScores(ScoreBag(reference)), tests, q);
            return py::make_tuple(r.per_test_p, r.rejected);
        },
        py::arg("reference_scores"), py::arg("test_scores"), py::arg("q"), "Returns (p_values, rejected_indices).");

    // Simulation
    m.def(
        "run_experiment",
        [](const std::string& config_json, std::optional<std::size_t> replicates, std::optional<unsigned> threads) {
            auto config = sim::config_from_json_text(config_json);
            if (replicates) config.replicates = *replicates;
            if (threads) config.threads = *threads;
            std::vector<sim::MetricRow> rows;
            {
                py::gil_scoped_release release;
                rows = sim::run_experiment(config);
            }
            py::list out;
            for (const auto& r : rows) out.append(metric_dict(r));
            return out;
        },
        py::arg("config_json"), py::arg("replicates") = py::none(), py::arg("threads") = py::none(),
        "Runs a simulation described by a JSON config string; returns one dict per (method, n).");
}
