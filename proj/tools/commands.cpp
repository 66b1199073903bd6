#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "conformal/outlier.hpp"
#include "conformal/pac.hpp"
#include "conformal/sim_lab.hpp"
#include "conformal/split_conformal.hpp"

namespace conformal::cli {

namespace {

using io::CalibrationMethod;
using io::CsvTable;
using nlohmann::json;

constexpr std::uint64_t kPredictUTag = 0x7072656469637400ULL;

/// Signals a well-formed request whose answer is "no valid choice exists".
struct Infeasible {
    std::string message;
};

std::vector<std::size_t> probability_columns(const CsvTable& table) {
    std::vector<std::size_t> cols;
    for (int k = 1;; ++k) {
        const auto c = table.column("p" + std::to_string(k));
        if (!c) break;
        cols.push_back(*c);
    }
    return cols;
}

// Feature vector handed to the model callbacks: the x columns when a model artifact
// is used, otherwise the precomputed prediction columns.
std::vector<double> model_inputs(const CsvTable& table, std::size_t row, CalibrationMethod method,
                                 const std::optional<io::ModelArtifact>& model) {
    std::vector<double> v;
    if (model) {
        for (std::size_t c : io::sample_columns(table).features) v.push_back(table.number(row, c));
        return v;
    }
    switch (method) {
        case CalibrationMethod::mean_residual:
            v.push_back(table.number(row, table.require("mhat")));
            break;
        case CalibrationMethod::cqr:
            v.push_back(table.number(row, table.require("qlo")));
            v.push_back(table.number(row, table.require("qhi")));
            break;
        case CalibrationMethod::class_threshold:
        case CalibrationMethod::class_cumulative: {
            const auto cols = probability_columns(table);
            if (cols.empty()) throw DomainError("missing probability columns p1..pK");
            for (std::size_t c : cols) v.push_back(table.number(row, c));
            break;
        }
        case CalibrationMethod::one_sided:
            break;
    }
    return v;
}

RegressionModels regression_models(const std::optional<io::ModelArtifact>& model) {
    RegressionModels m;
    if (model) {
        if (model->mean) m.mean_hat = [lm = *model->mean](std::span<const double> x) { return lm.predict(x); };
        if (model->lower) m.q_lo_hat = [lm = *model->lower](std::span<const double> x) { return lm.predict(x); };
        if (model->upper) m.q_hi_hat = [lm = *model->upper](std::span<const double> x) { return lm.predict(x); };
        return m;
    }
    m.mean_hat = [](std::span<const double> x) { return x[0]; };
    m.q_lo_hat = [](std::span<const double> x) { return x[0]; };
    m.q_hi_hat = [](std::span<const double> x) { return x[1]; };
    return m;
}

Classifier classifier(const std::optional<io::ModelArtifact>& model) {
    if (model) {
        if (!model->softmax) throw DomainError("model artifact has no softmax classifier");
        return {[sm = *model->softmax](std::span<const double> x) { return sm.predict(x); }, true};
    }
    return {[](std::span<const double> x) { return std::vector<double>(x.begin(), x.end()); }, true};
}

int resolve_num_classes(const CalibrateOptions& options, const CsvTable& table,
                        const std::optional<io::ModelArtifact>& model) {
    if (options.num_classes) return *options.num_classes;
    if (model && model->softmax) return model->softmax->num_classes();
    const auto pcols = probability_columns(table);
    if (!pcols.empty()) return static_cast<int>(pcols.size());
    int K = 1;
    for (double v : io::numeric_column(table, "label")) K = std::max(K, static_cast<int>(v));
    return K;
}

std::vector<LabeledSample> calibration_samples(const CsvTable& table, CalibrationMethod method, int K,
                                               const std::optional<io::ModelArtifact>& model) {
    auto samples = io::read_samples(table, io::is_classification(method) ? std::optional<int>(K) : std::nullopt);
    for (std::size_t r = 0; r < samples.size(); ++r) samples[r].features = model_inputs(table, r, method, model);
    return samples;
}

ExtendedReal threshold_for(CalibrationMethod method, const ScoreBag& scores, double alpha) {
    switch (method) {
        case CalibrationMethod::one_sided:
            return one_sided_upper_bound(scores, alpha);
        case CalibrationMethod::mean_residual:
        case CalibrationMethod::cqr:
            return conformal_quantile(scores, alpha);
        case CalibrationMethod::class_threshold:
        case CalibrationMethod::class_cumulative:
            return classification_threshold(scores, alpha);
    }
    throw DomainError("unknown method");
}

std::ostream& output_stream(const GlobalOptions& global, std::ostream& out, std::ofstream& file) {
    if (global.output.empty()) return out;
    file.open(global.output);
    if (!file) throw DomainError("cannot write '" + global.output + "'");
    return file;
}

json extended_json(const ExtendedReal& x) {
    if (x.is_finite()) return x.value();
    return io::format_number(x.value());
}

void write_predictions(std::ostream& os, const io::Snapshot& snapshot, const std::vector<PredictionRow>& rows,
                       bool emit_pvalues, Format format) {
    const bool classification = io::is_classification(snapshot.method);
    if (format == Format::json) {
        json out = json::array();
        for (const auto& r : rows) {
            json j = {{"index", r.index}};
            if (classification) {
                j["labels"] = r.labels;
            } else {
                j["lower"] = extended_json(r.lower);
                j["upper"] = extended_json(r.upper);
                j["empty"] = r.empty;
            }
            if (emit_pvalues) j["pvalues"] = r.pvalues;
            out.push_back(std::move(j));
        }
        os << out.dump(2) << '\n';
        return;
    }
    os << "index";
    if (classification) {
        os << ",labels";
        if (emit_pvalues)
            for (int k = 1; k <= snapshot.num_classes; ++k) os << ",p" << k;
    } else {
        os << ",lower,upper,empty";
        if (emit_pvalues) os << ",p";
    }
    os << '\n';
    for (const auto& r : rows) {
        os << r.index;
        if (classification) {
            os << ',';
            for (std::size_t i = 0; i < r.labels.size(); ++i) os << (i ? ";" : "") << r.labels[i];
        } else {
            os << ',' << to_string(r.lower) << ',' << to_string(r.upper) << ',' << (r.empty ? 1 : 0);
        }
        if (emit_pvalues)
            for (double p : r.pvalues) os << ',' << io::format_number(p);
        os << '\n';
    }
}

void validate_open_unit(double v, const char* name) {
    if (!(v > 0.0 && v < 1.0)) throw DomainError(std::string(name) + " must lie in (0,1)");
}

int cmd_calibrate(const CalibrateOptions& options, const GlobalOptions& global, std::ostream& out) {
    const auto snapshot = calibrate(options, global);
    std::ofstream file;
    auto& os = output_stream(global, out, file);
    os << io::snapshot_to_json_text(snapshot);
    return kSuccess;
}

int cmd_predict(const PredictOptions& options, const GlobalOptions& global, std::ostream& out) {
    const auto snapshot = io::load_snapshot(options.snapshot);
    const auto tests = io::read_csv_file(options.test_csv);
    const auto rows = predict(snapshot, tests, options, global);
    std::ofstream file;
    write_predictions(output_stream(global, out, file), snapshot, rows, options.emit_pvalues, global.format);
    return kSuccess;
}

int cmd_simulate(const std::string& config_path, std::optional<std::size_t> replicates, std::optional<unsigned> threads,
                 const GlobalOptions& global, std::ostream& out) {
    auto config = sim::load_config(config_path);
    if (global.seed_given) config.seed = global.seed;
    if (replicates) config.replicates = *replicates;
    if (threads) config.threads = *threads;
    sim::validate(config);
    const auto rows = sim::run_experiment(config);
    std::ofstream file;
    auto& os = output_stream(global, out, file);
    if (global.format == Format::json)
        sim::write_metrics_json(os, rows);
    else
        sim::write_metrics_csv(os, rows);
    return kSuccess;
}

std::vector<double> score_column(const CsvTable& table, const std::string& requested) {
    if (!requested.empty()) return io::numeric_column(table, requested);
    if (table.has("score")) return io::numeric_column(table, "score");
    if (table.has("y")) return io::numeric_column(table, "y");
    throw DomainError("no score column: provide 'score' or 'y', or pass --score-column");
}

int cmd_outliers(const std::string& reference_csv, const std::string& tests_csv, double q, const std::string& column,
                 const GlobalOptions& global, std::ostream& out) {
    validate_open_unit(q, "q");
    const auto ref_table = io::read_csv_file(reference_csv);
    const auto test_table = io::read_csv_file(tests_csv);
    if (ref_table.size() == 0) throw DomainError("empty reference set");
    if (test_table.size() == 0) throw DomainError("no test cases");
    const ReferenceScores reference(ScoreBag(score_column(ref_table, column)));
    const auto test_scores = score_column(test_table, column);
    const auto result = screen_scores(reference, test_scores, q);

    std::vector<bool> rejected(test_scores.size(), false);
    for (std::size_t i : result.rejected) rejected[i] = true;
    std::ofstream file;
    auto& os = output_stream(global, out, file);
    if (global.format == Format::json) {
        json arr = json::array();
        for (std::size_t i = 0; i < test_scores.size(); ++i)
            arr.push_back(json{{"index", i}, {"p", result.per_test_p[i]}, {"rejected", static_cast<bool>(rejected[i])}});
        os << arr.dump(2) << '\n';
    } else {
        os << "index,p,rejected\n";
        for (std::size_t i = 0; i < test_scores.size(); ++i)
            os << i << ',' << io::format_number(result.per_test_p[i]) << ',' << (rejected[i] ? 1 : 0) << '\n';
    }
    return kSuccess;
}

int cmd_pac_r(std::size_t n, double alpha, double delta, const GlobalOptions& global, std::ostream& out) {
    if (n == 0) throw DomainError("n must be positive");
    const auto sel = select_r_pac(n, PacTarget(alpha, delta));
    std::ofstream file;
    auto& os = output_stream(global, out, file);
    if (!sel.feasible) {
        if (global.format == Format::json)
            os << json{{"n", n}, {"alpha", alpha}, {"delta", delta}, {"feasible", false}}.dump(2) << '\n';
        else
            os << "infeasible\n";
        throw Infeasible{"no r in [0, n-1] reaches the requested confidence"};
    }
    if (global.format == Format::json)
        os << json{{"n", n}, {"alpha", alpha}, {"delta", delta}, {"feasible", true}, {"r", sel.r}, {"achieved", sel.achieved}}
                  .dump(2)
           << '\n';
    else
        os << "r,achieved\n" << sel.r << ',' << io::format_number(sel.achieved) << '\n';
    return kSuccess;
}

}  // namespace

io::Snapshot calibrate(const CalibrateOptions& options, const GlobalOptions& global) {
    const auto method = io::calibration_method_from_string(options.method);
    check_alpha(options.alpha);
    const auto table = io::read_csv_file(options.calib_csv);
    if (table.size() == 0) throw DomainError("empty calibration set");

    std::optional<io::ModelArtifact> model;
    if (options.model != "precomputed-scores") model = io::load_model(options.model);

    io::Snapshot snapshot;
    snapshot.method = method;
    snapshot.alpha = options.alpha;
    snapshot.randomize = options.randomize;
    snapshot.seed = global.seed;
    snapshot.model = model;
    if (io::is_classification(method)) snapshot.num_classes = resolve_num_classes(options, table, model);

    std::optional<ScoreBag> scores;
    if (!model && table.has("score")) {
        scores = ScoreBag(io::numeric_column(table, "score"));
    } else if (method == CalibrationMethod::one_sided) {
        scores = ScoreBag(io::numeric_column(table, "y"));
    } else {
        const CalibrationSet calib(calibration_samples(table, method, snapshot.num_classes, model));
        switch (method) {
            case CalibrationMethod::mean_residual:
                scores = absolute_residuals(regression_models(model), calib);
                break;
            case CalibrationMethod::cqr:
                scores = cqr_scores(regression_models(model), calib);
                break;
            case CalibrationMethod::class_threshold:
                scores = class_threshold_scores(classifier(model), calib);
                break;
            case CalibrationMethod::class_cumulative:
                scores = cumulative_scores(classifier(model), calib, options.randomize, global.seed);
                break;
            case CalibrationMethod::one_sided:
                break;
        }
    }
    snapshot.sorted_scores.assign(scores->sorted().begin(), scores->sorted().end());
    snapshot.threshold = threshold_for(method, *scores, options.alpha);
    return snapshot;
}

std::vector<PredictionRow> predict(const io::Snapshot& snapshot, const CsvTable& tests, const PredictOptions& options,
                                   const GlobalOptions& global) {
    const double alpha = options.alpha.value_or(snapshot.alpha);
    check_alpha(alpha);
    const ScoreBag bag(snapshot.sorted_scores);
    const ExtendedReal threshold = options.alpha ? threshold_for(snapshot.method, bag, alpha) : snapshot.threshold;
    const std::uint64_t seed = global.seed_given ? global.seed : snapshot.seed;
    const auto method = snapshot.method;
    const auto models = regression_models(snapshot.model);
    const auto u_col = tests.column("u");

    auto p_of = [&](double score) { return PValueResult{bag.count_at_least(score), bag.size()}.value(); };

    std::vector<PredictionRow> rows;
    rows.reserve(tests.size());
    for (std::size_t r = 0; r < tests.size(); ++r) {
        PredictionRow row;
        row.index = r;
        const auto x = model_inputs(tests, r, method, snapshot.model);
        std::optional<double> y;
        if (options.emit_pvalues && !io::is_classification(method)) y = tests.number(r, tests.require("y"));

        switch (method) {
            case CalibrationMethod::one_sided:
                row.lower = ExtendedReal::neg_inf();
                row.upper = threshold;
                if (y) row.pvalues.push_back(p_of(*y));
                break;
            case CalibrationMethod::mean_residual: {
                const double m = models.mean_hat(x);
                const auto set = mean_residual_interval(m, bag, alpha).interval();
                row.lower = set.lower;
                row.upper = set.upper;
                row.empty = set.empty;
                if (y) row.pvalues.push_back(p_of(std::abs(*y - m)));
                break;
            }
            case CalibrationMethod::cqr: {
                const double lo = models.q_lo_hat(x);
                const double hi = models.q_hi_hat(x);
                const auto set = cqr_interval(lo, hi, bag, alpha).interval();
                row.lower = set.lower;
                row.upper = set.upper;
                row.empty = set.empty;
                if (y) row.pvalues.push_back(p_of(std::max(lo - *y, *y - hi)));
                break;
            }
            case CalibrationMethod::class_threshold:
            case CalibrationMethod::class_cumulative: {
                const auto probs = classifier(snapshot.model).probabilities(x);
                if (static_cast<int>(probs.size()) != snapshot.num_classes)
                    throw DomainError("test row has " + std::to_string(probs.size()) + " class probabilities, snapshot has " +
                                      std::to_string(snapshot.num_classes));
                if (method == CalibrationMethod::class_threshold) {
                    row.labels = classification_threshold_set(probs, threshold, alpha).label_set().labels;
                    if (options.emit_pvalues)
                        for (double p : probs) row.pvalues.push_back(p_of(-p));
                } else {
                    std::optional<double> u;
                    if (snapshot.randomize) u = u_col ? tests.number(r, *u_col) : Stream(seed, {kPredictUTag, r}).uniform();
                    row.labels = cumulative_probability_set(probs, threshold, u, alpha).label_set().labels;
                    if (options.emit_pvalues)
                        for (int k = 1; k <= snapshot.num_classes; ++k)
                            row.pvalues.push_back(p_of(cumulative_probability_score(probs, k, u)));
                }
                break;
            }
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Distribution-free prediction sets, outlier screening and simulation"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOptions global;
    std::string format = "csv";
    app.add_option("--seed", global.seed, "Random seed (default " + std::to_string(kDefaultSeed) + ")");
    app.add_option("--output", global.output, "Write results to this file instead of stdout");
    app.add_option("--format", format, "Output format")->check(CLI::IsMember({"csv", "json"}));

    const auto unit_open = CLI::Validator(
        [](std::string& s) -> std::string {
            try {
                const double v = std::stod(s);
                if (v > 0.0 && v < 1.0) return {};
            } catch (...) {
            }
            return "value must lie strictly between 0 and 1";
        },
        "(0,1)");

    CalibrateOptions cal;
    auto* calibrate_cmd = app.add_subcommand("calibrate", "Calibrate a split-conformal method and write a snapshot");
    calibrate_cmd->add_option("--calib", cal.calib_csv, "Calibration CSV")->required()->check(CLI::ExistingFile);
    calibrate_cmd->add_option("--method", cal.method, "Method")
        ->required()
        ->check(CLI::IsMember({"mean_residual", "cqr", "class_threshold", "class_cumulative", "one_sided"}));
    calibrate_cmd->add_option("--model", cal.model, "Model artifact JSON, or precomputed-scores");
    calibrate_cmd->add_option("--alpha", cal.alpha, "Miscoverage level")->required()->check(unit_open);
    calibrate_cmd->add_flag("--randomize", cal.randomize, "Randomized cumulative-probability scores");
    calibrate_cmd->add_option("--num-classes", cal.num_classes, "Number of classes K");

    PredictOptions pred;
    auto* predict_cmd = app.add_subcommand("predict", "Prediction sets for new rows from a snapshot");
    predict_cmd->add_option("--snapshot", pred.snapshot, "Snapshot JSON")->required()->check(CLI::ExistingFile);
    predict_cmd->add_option("--tests", pred.test_csv, "Test CSV")->required()->check(CLI::ExistingFile);
    predict_cmd->add_option("--alpha", pred.alpha, "Override the snapshot's alpha")->check(unit_open);
    predict_cmd->add_flag("--emit-pvalues", pred.emit_pvalues, "Also print conformal p-values");

    std::string config_path;
    std::optional<std::size_t> replicates;
    std::optional<unsigned> threads;
    auto* simulate_cmd = app.add_subcommand("simulate", "Run a Monte Carlo experiment from a JSON config");
    simulate_cmd->add_option("--config", config_path, "Experiment config JSON")->required()->check(CLI::ExistingFile);
    simulate_cmd->add_option("--replicates", replicates, "Override the number of replicates");
    simulate_cmd->add_option("--threads", threads, "Worker threads (0 = all cores)");

    std::string reference_csv;
    std::string tests_csv;
    std::string score_col;
    double q = 0.1;
    auto* outliers_cmd = app.add_subcommand("outliers", "Conformal outlier screening with Benjamini-Hochberg");
    outliers_cmd->add_option("--reference", reference_csv, "Reference (inlier) CSV")->required()->check(CLI::ExistingFile);
    outliers_cmd->add_option("--tests", tests_csv, "Test CSV")->required()->check(CLI::ExistingFile);
    outliers_cmd->add_option("--q", q, "Target false discovery rate")->check(unit_open);
    outliers_cmd->add_option("--score-column", score_col, "Score column (default: score, else y)");

    std::size_t pac_n = 0;
    double pac_alpha = 0.1;
    double pac_delta = 0.05;
    auto* pac_cmd = app.add_subcommand("pac-r", "Largest r giving (alpha, delta) PAC coverage");
    pac_cmd->add_option("--n", pac_n, "Calibration size")->required()->check(CLI::PositiveNumber);
    pac_cmd->add_option("--alpha", pac_alpha, "Miscoverage level")->required()->check(unit_open);
    pac_cmd->add_option("--delta", pac_delta, "Confidence slack")->required()->check(unit_open);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kSuccess;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    }
    global.seed_given = app.count("--seed") > 0;
    global.format = format == "json" ? Format::json : Format::csv;

    try {
        if (*calibrate_cmd) return cmd_calibrate(cal, global, out);
        if (*predict_cmd) return cmd_predict(pred, global, out);
        if (*simulate_cmd) return cmd_simulate(config_path, replicates, threads, global, out);
        if (*outliers_cmd) return cmd_outliers(reference_csv, tests_csv, q, score_col, global, out);
        if (*pac_cmd) return cmd_pac_r(pac_n, pac_alpha, pac_delta, global, out);
    } catch (const Infeasible& e) {
        err << "infeasible: " << e.message << '\n';
        return kInfeasible;
    } catch (const DomainError& e) {
        err << "error: " << e.what() << '\n';
        return kInputError;
    } catch (const OperationalError& e) {
        err << "numerical failure: " << e.what() << '\n';
        return kNumericalFailure;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return kNumericalFailure;
    }
    return kInputError;
}

}  // namespace conformal::cli
