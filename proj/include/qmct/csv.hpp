#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "qmct/errors.hpp"
#include "qmct/quantile.hpp"

namespace qmct {

/// Splits one CSV line; double quotes protect separators, "" is a literal quote.
inline std::vector<std::string> split_csv_line(std::string_view line, char sep = ',')
{
    std::vector<std::string> out(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                out.back() += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                out.back() += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == sep) {
            out.emplace_back();
        } else if (c != '\r') {
            out.back() += c;
        }
    }
    return out;
}

inline std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

/// Parses a whole field as a finite double.
inline bool parse_double(std::string_view s, double& out)
{
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    if (s.empty()) return false;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && end == s.data() + s.size() && std::isfinite(out);
}

struct CsvReadResult
{
    GroupedSample data;
    /// Rows skipped because the group or value cell was empty.
    std::size_t missing = 0;
};

/// Groups appear in first-appearance order of their labels.
inline CsvReadResult read_grouped_csv(std::istream& in, std::string_view group_column, std::string_view value_column)
{
    std::string line;
    if (!std::getline(in, line)) throw DataError("input has no header row");
    if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    const auto header = split_csv_line(line);
    std::size_t gcol = header.size(), vcol = header.size();
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (trim(header[c]) == group_column) gcol = c;
        if (trim(header[c]) == value_column) vcol = c;
    }
    if (gcol == header.size()) throw DataError("column '" + std::string(group_column) + "' not found in header");
    if (vcol == header.size()) throw DataError("column '" + std::string(value_column) + "' not found in header");

    std::vector<std::string> labels;
    std::map<std::string, std::size_t, std::less<>> index;
    std::vector<std::vector<double>> groups;
    CsvReadResult result;
    for (std::size_t row = 2; std::getline(in, line); ++row) {
        if (trim(line).empty()) continue;
        const auto cells = split_csv_line(line);
        const auto label = gcol < cells.size() ? std::string(trim(cells[gcol])) : std::string();
        const auto text = vcol < cells.size() ? trim(cells[vcol]) : std::string_view();
        if (label.empty() || text.empty() || text == "NA") {
            ++result.missing;
            continue;
        }
        double x = 0.0;
        if (!parse_double(text, x))
            throw DataError("row " + std::to_string(row) + ": value '" + std::string(text) + "' is not numeric");
        auto [it, fresh] = index.try_emplace(label, labels.size());
        if (fresh) {
            labels.push_back(label);
            groups.emplace_back();
        }
        groups[it->second].push_back(x);
    }
    if (groups.empty()) throw DataError("input has no usable rows");
    // Stored sorted, so row order does not matter.
    for (auto& g : groups) std::sort(g.begin(), g.end());
    result.data = GroupedSample(std::move(groups), std::move(labels));
    return result;
}

inline CsvReadResult read_grouped_csv(const std::string& path, std::string_view group_column,
                                      std::string_view value_column)
{
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    return read_grouped_csv(in, group_column, value_column);
}

}  // namespace qmct
