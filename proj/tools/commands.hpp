#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "conformal/csv.hpp"
#include "conformal/pvalue_engine.hpp"
#include "conformal/random.hpp"
#include "conformal/snapshot.hpp"

namespace conformal::cli {

enum ExitCode : int { kSuccess = 0, kInputError = 2, kInfeasible = 3, kNumericalFailure = 4 };

enum class Format { csv, json };

struct GlobalOptions {
    std::uint64_t seed = kDefaultSeed;
    bool seed_given = false;
    std::string output;  // empty: stdout
    Format format = Format::csv;
};

struct CalibrateOptions {
    std::string calib_csv;
    std::string method;
    std::string model = "precomputed-scores";
    double alpha = 0.1;
    bool randomize = false;
    std::optional<int> num_classes;
};

struct PredictOptions {
    std::string snapshot;
    std::string test_csv;
    std::optional<double> alpha;
    bool emit_pvalues = false;
};

/// One prediction row: an interval (regression) or a label list (classification),
/// with optional p-values.
struct PredictionRow {
    std::size_t index = 0;
    ExtendedReal lower;
    ExtendedReal upper;
    bool empty = false;
    std::vector<int> labels;
    std::vector<double> pvalues;
};

io::Snapshot calibrate(const CalibrateOptions& options, const GlobalOptions& global);
std::vector<PredictionRow> predict(const io::Snapshot& snapshot, const io::CsvTable& tests, const PredictOptions& options,
                                   const GlobalOptions& global);

/// Parses argv-style arguments (without the program name) and runs the command.
/// Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace conformal::cli
