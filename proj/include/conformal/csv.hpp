#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "conformal/core_types.hpp"

namespace conformal::io {

/// Comma-separated table with a mandatory header row. No quoting.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::optional<std::size_t> column(const std::string& name) const;
    bool has(const std::string& name) const { return column(name).has_value(); }
    std::size_t require(const std::string& name) const;
    double number(std::size_t row, std::size_t col) const;
    std::size_t size() const { return rows.size(); }
};

CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);

/// 17 significant digits; infinities as inf / -inf.
std::string format_number(double v);

/// Columns of the shared sample schema: features x1..xd, outcome `y` (real) or
/// `label` (1..K), optional `u` in [0,1].
struct SampleColumns {
    std::vector<std::size_t> features;
    std::optional<std::size_t> y;
    std::optional<std::size_t> label;
    std::optional<std::size_t> u;
};

SampleColumns sample_columns(const CsvTable& table);

/// Rows as samples. `K` is required for label outcomes; rows without an outcome
/// column get a placeholder real outcome of 0.
std::vector<LabeledSample> read_samples(const CsvTable& table, std::optional<int> K);

/// Values of a numeric column, rejecting NaN.
std::vector<double> numeric_column(const CsvTable& table, const std::string& name);

}  // namespace conformal::io
