#include "conformal/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <sstream>

namespace conformal::io {

namespace {

std::string trim(std::string s) {
    const auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(trim(field));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_number(const std::string& s) {
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    if (!s.empty() && *begin == '+') ++begin;
    const auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end || s.empty()) throw DomainError("not a number: '" + s + "'");
    return v;
}

}  // namespace

std::optional<std::size_t> CsvTable::column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
}

std::size_t CsvTable::require(const std::string& name) const {
    const auto c = column(name);
    if (!c) throw DomainError("missing column '" + name + "'");
    return *c;
}

double CsvTable::number(std::size_t row, std::size_t col) const {
    try {
        return parse_number(rows.at(row).at(col));
    } catch (const DomainError& e) {
        throw DomainError("row " + std::to_string(row + 1) + ", column '" + header.at(col) + "': " + e.what());
    }
}

CsvTable read_csv(std::istream& in) {
    CsvTable table;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!have_header && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
        if (trim(line).empty()) continue;
        auto fields = split_line(line);
        if (!have_header) {
            table.header = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() != table.header.size())
            throw DomainError("row " + std::to_string(table.rows.size() + 1) + " has " +
                              std::to_string(fields.size()) + " fields, header has " +
                              std::to_string(table.header.size()));
        table.rows.push_back(std::move(fields));
    }
    if (!have_header) throw DomainError("CSV has no header row");
    return table;
}

CsvTable read_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DomainError("cannot open '" + path + "'");
    return read_csv(in);
}

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

SampleColumns sample_columns(const CsvTable& table) {
    SampleColumns cols;
    for (std::size_t j = 1;; ++j) {
        const auto c = table.column("x" + std::to_string(j));
        if (!c) break;
        cols.features.push_back(*c);
    }
    cols.y = table.column("y");
    cols.label = table.column("label");
    cols.u = table.column("u");
    if (cols.y && cols.label) throw DomainError("CSV carries both 'y' and 'label' columns");
    return cols;
}

std::vector<LabeledSample> read_samples(const CsvTable& table, std::optional<int> K) {
    const auto cols = sample_columns(table);
    std::vector<LabeledSample> out;
    out.reserve(table.size());
    for (std::size_t r = 0; r < table.size(); ++r) {
        LabeledSample z;
        for (std::size_t c : cols.features) z.features.push_back(table.number(r, c));
        if (cols.u) z.tiebreak_u = table.number(r, *cols.u);
        if (cols.y) {
            z.outcome = Outcome::real(table.number(r, *cols.y));
        } else if (cols.label) {
            if (!K) throw DomainError("label outcomes require the number of classes");
            const double v = table.number(r, *cols.label);
            if (v != std::floor(v)) throw DomainError("label must be an integer");
            z.outcome = Outcome::category(static_cast<int>(v), *K);
        }
        z.validate();
        out.push_back(std::move(z));
    }
    return out;
}

std::vector<double> numeric_column(const CsvTable& table, const std::string& name) {
    const std::size_t c = table.require(name);
    std::vector<double> v(table.size());
    for (std::size_t r = 0; r < table.size(); ++r) {
        v[r] = table.number(r, c);
        if (std::isnan(v[r])) throw DomainError("column '" + name + "' contains NaN");
    }
    return v;
}

}  // namespace conformal::io
