#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qmct/csv.hpp"
#include "qmct/errors.hpp"

namespace qmct {

struct ContrastResult
{
    std::string label;
    /// h'q of the observed data.
    double estimate = 0.0;
    double margin = 0.0;
    double statistic = 0.0;
    double critical_value = 0.0;
    std::optional<double> adjusted_p;
    bool reject = false;

    friend bool operator==(const ContrastResult& a, const ContrastResult& b)
    {
        const auto same = [](double x, double y) { return x == y || (std::isnan(x) && std::isnan(y)); };
        return a.label == b.label && same(a.estimate, b.estimate) && same(a.margin, b.margin) &&
               same(a.statistic, b.statistic) && same(a.critical_value, b.critical_value) &&
               a.adjusted_p == b.adjusted_p && a.reject == b.reject;
    }
};

/// Outcome of one analysis, rows in contrast-matrix order.
struct ResultRecord
{
    std::vector<ContrastResult> rows;
    bool global_reject = false;
    std::string method;
    std::string estimator;
    std::string direction;
    std::string family;
    double alpha = 0.05;
    std::uint64_t seed = 0;
    std::size_t resamples = 0;
    std::size_t resamples_failed = 0;
    std::size_t total_size = 0;
    std::vector<std::string> groups;

    friend bool operator==(const ResultRecord&, const ResultRecord&) = default;
};

/// Shortest text that reads back to the same double.
inline std::string format_number(double x)
{
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    if (std::isnan(x)) return "nan";
    std::array<char, 32> buf{};
    const auto end = std::to_chars(buf.data(), buf.data() + buf.size(), x).ptr;
    return std::string(buf.data(), end);
}

inline double parse_number(std::string_view s)
{
    s = trim(s);
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    double x = 0.0;
    if (!parse_double(s, x)) throw DataError("'" + std::string(s) + "' is not a number");
    return x;
}

inline std::string csv_quote(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
}

inline void write_delimited(std::ostream& out, const ResultRecord& rec)
{
    out << "# method=" << rec.method << "\n# estimator=" << rec.estimator << "\n# direction=" << rec.direction
        << "\n# family=" << rec.family << "\n# alpha=" << format_number(rec.alpha) << "\n# seed=" << rec.seed
        << "\n# B=" << rec.resamples << "\n# resamples_failed=" << rec.resamples_failed << "\n# n=" << rec.total_size
        << "\n# global_reject=" << (rec.global_reject ? 1 : 0) << "\n# groups=";
    for (std::size_t i = 0; i < rec.groups.size(); ++i) out << (i ? ";" : "") << rec.groups[i];
    out << "\nlabel,estimate,margin,statistic,critical_value,adjusted_p,reject\n";
    for (const auto& r : rec.rows)
        out << csv_quote(r.label) << ',' << format_number(r.estimate) << ',' << format_number(r.margin) << ','
            << format_number(r.statistic) << ',' << format_number(r.critical_value) << ','
            << (r.adjusted_p ? format_number(*r.adjusted_p) : std::string("NA")) << ',' << (r.reject ? 1 : 0) << '\n';
}

inline ResultRecord parse_delimited(std::istream& in)
{
    ResultRecord rec;
    std::string line;
    bool header = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line.rfind("# ", 0) == 0) {
            const auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            const auto key = line.substr(2, eq - 2), value = line.substr(eq + 1);
            if (key == "method") rec.method = value;
            else if (key == "estimator") rec.estimator = value;
            else if (key == "direction") rec.direction = value;
            else if (key == "family") rec.family = value;
            else if (key == "alpha") rec.alpha = parse_number(value);
            else if (key == "seed") rec.seed = std::stoull(value);
            else if (key == "B") rec.resamples = std::stoull(value);
            else if (key == "resamples_failed") rec.resamples_failed = std::stoull(value);
            else if (key == "n") rec.total_size = std::stoull(value);
            else if (key == "global_reject") rec.global_reject = value == "1";
            else if (key == "groups") rec.groups = value.empty() ? std::vector<std::string>{} : split_csv_line(value, ';');
            continue;
        }
        if (!header) {
            header = true;
            continue;
        }
        const auto cells = split_csv_line(line);
        if (cells.size() != 7) throw DataError("result row has " + std::to_string(cells.size()) + " fields, expected 7");
        ContrastResult r;
        r.label = cells[0];
        r.estimate = parse_number(cells[1]);
        r.margin = parse_number(cells[2]);
        r.statistic = parse_number(cells[3]);
        r.critical_value = parse_number(cells[4]);
        if (trim(cells[5]) != "NA") r.adjusted_p = parse_number(cells[5]);
        r.reject = trim(cells[6]) == "1";
        rec.rows.push_back(std::move(r));
    }
    return rec;
}

namespace detail {

inline nlohmann::ordered_json json_number(double x)
{
    if (std::isfinite(x)) return x;
    return format_number(x);
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const ResultRecord& rec)
{
    nlohmann::ordered_json j;
    j["method"] = rec.method;
    j["estimator"] = rec.estimator;
    j["direction"] = rec.direction;
    j["family"] = rec.family;
    j["alpha"] = rec.alpha;
    j["seed"] = rec.seed;
    j["B"] = rec.resamples;
    j["resamples_failed"] = rec.resamples_failed;
    j["n"] = rec.total_size;
    j["groups"] = rec.groups;
    j["global_reject"] = rec.global_reject;
    j["contrasts"] = nlohmann::ordered_json::array();
    for (const auto& r : rec.rows) {
        nlohmann::ordered_json row;
        row["label"] = r.label;
        row["estimate"] = detail::json_number(r.estimate);
        row["margin"] = r.margin;
        row["statistic"] = detail::json_number(r.statistic);
        row["critical_value"] = detail::json_number(r.critical_value);
        row["adjusted_p"] = r.adjusted_p ? nlohmann::ordered_json(*r.adjusted_p) : nlohmann::ordered_json();
        row["reject"] = r.reject;
        j["contrasts"].push_back(std::move(row));
    }
    return j;
}

inline void write_table(std::ostream& out, const ResultRecord& rec)
{
    std::size_t width = 8;
    for (const auto& r : rec.rows) width = std::max(width, r.label.size());
    out << "method " << rec.method << ", estimator " << rec.estimator << ", " << rec.direction << ", alpha "
        << rec.alpha << ", n " << rec.total_size << '\n';
    out << std::left << std::setw(static_cast<int>(width)) << "contrast" << std::right << std::setw(12) << "estimate"
        << std::setw(10) << "margin" << std::setw(12) << "statistic" << std::setw(10) << "critical" << std::setw(10)
        << "adj. p" << "  decision\n";
    out << std::fixed;
    for (const auto& r : rec.rows) {
        out << std::left << std::setw(static_cast<int>(width)) << r.label << std::right << std::setprecision(4)
            << std::setw(12) << r.estimate << std::setw(10) << r.margin << std::setw(12) << r.statistic
            << std::setw(10) << r.critical_value << std::setw(10);
        if (r.adjusted_p)
            out << *r.adjusted_p;
        else
            out << "-";
        out << "  " << (r.reject ? "reject" : "-") << '\n';
    }
    out.unsetf(std::ios::fixed);
    out << "global null " << (rec.global_reject ? "rejected" : "not rejected");
    if (rec.resamples > 0) out << " (B = " << rec.resamples << ", seed " << rec.seed << ")";
    if (rec.resamples_failed > 0) out << ", " << rec.resamples_failed << " resamples dropped";
    out << '\n';
}

}  // namespace qmct
