#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "qmct/contrasts.hpp"
#include "qmct/covariance.hpp"
#include "qmct/csv.hpp"
#include "qmct/errors.hpp"
#include "qmct/inference.hpp"
#include "qmct/quantile.hpp"
#include "qmct/report.hpp"
#include "qmct/rng.hpp"

namespace qmct {

/// Directions accepted on the command line. NonInferiorityReversed tests
/// H0: h'q >= eps by negating rows and margins.
enum class DirectionSpec { TwoSided, NonInferiority, NonInferiorityReversed, Equivalence };

inline std::string_view to_string(DirectionSpec d)
{
    switch (d) {
    case DirectionSpec::TwoSided: return "two-sided";
    case DirectionSpec::NonInferiority: return "noninferiority";
    case DirectionSpec::NonInferiorityReversed: return "noninferiority-reversed";
    case DirectionSpec::Equivalence: return "equivalence";
    }
    return "?";
}

inline DirectionSpec parse_direction(std::string_view s)
{
    for (auto d : {DirectionSpec::TwoSided, DirectionSpec::NonInferiority, DirectionSpec::NonInferiorityReversed,
                   DirectionSpec::Equivalence})
        if (to_string(d) == s) return d;
    throw ConfigError("unknown direction '" + std::string(s) +
                      "' (expected two-sided, noninferiority, noninferiority-reversed, equivalence)");
}

/// How the per-probability contrasts are combined: every probability on its
/// own, or median and IQR on the grid (0.25, 0.5, 0.75).
enum class EffectSpec { PerQuantile, MedianIqr };

inline EffectSpec parse_effect(std::string_view s)
{
    if (s == "quantiles" || s == "median") return EffectSpec::PerQuantile;
    if (s == "median-iqr") return EffectSpec::MedianIqr;
    throw ConfigError("unknown effect '" + std::string(s) + "' (expected quantiles, median, median-iqr)");
}

inline std::string_view to_string(EffectSpec e) { return e == EffectSpec::MedianIqr ? "median-iqr" : "quantiles"; }

struct CustomContrasts
{
    Eigen::MatrixXd rows;
    std::vector<std::string> labels;
};

/// {"rows": [[-1, 1, 0], ...], "labels": ["B-A", ...]}; labels optional.
inline CustomContrasts read_custom_contrasts(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open contrast file '" + path + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
        const auto rows = j.at("rows").get<std::vector<std::vector<double>>>();
        if (rows.empty() || rows.front().empty()) throw ConfigError("contrast file has no rows");
        CustomContrasts c;
        c.rows.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
        for (std::size_t l = 0; l < rows.size(); ++l) {
            if (rows[l].size() != rows.front().size()) throw ConfigError("contrast rows differ in length");
            for (std::size_t c2 = 0; c2 < rows[l].size(); ++c2)
                c.rows(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(c2)) = rows[l][c2];
        }
        if (j.contains("labels")) c.labels = j["labels"].get<std::vector<std::string>>();
        if (!c.labels.empty() && c.labels.size() != rows.size()) throw ConfigError("one label per contrast row required");
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("contrast file '" + path + "': " + e.what());
    }
}

/// Everything needed to build a family once the number of groups is known.
struct FamilySpec
{
    std::string name = "dunnett";
    EffectSpec effect = EffectSpec::PerQuantile;
    DirectionSpec direction = DirectionSpec::TwoSided;
    std::vector<double> margins{0.0};
    std::vector<double> quantiles{0.5};
    std::optional<CustomContrasts> custom;
};

struct BuiltFamily
{
    HypothesisFamily family;
    std::vector<std::string> labels;
};

inline ContrastMatrix base_contrasts(const std::string& name, std::size_t k)
{
    if (name == "dunnett") return dunnett(k);
    if (name == "tukey") return tukey(k);
    if (name == "grandmean") return grand_mean(k);
    throw ConfigError("unknown family '" + name + "' (expected dunnett, tukey, grandmean, custom)");
}

inline std::vector<std::string> base_labels(const ContrastMatrix& base, const std::vector<std::string>& groups)
{
    std::vector<std::string> out;
    for (std::size_t l = 0; l < base.rows(); ++l) {
        const auto row = base.row(l);
        std::string pos, neg;
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (row[i] == 1.0) pos = groups[i];
            if (row[i] == -1.0) neg = groups[i];
        }
        if (base.tag() == FamilyTag::GrandMean) out.push_back(groups[l] + " - mean");
        else if (!pos.empty() && !neg.empty()) out.push_back(pos + " - " + neg);
        else out.push_back("c" + std::to_string(l + 1));
    }
    return out;
}

inline std::string probability_label(double p)
{
    std::string s = format_number(p);
    return "q" + s;
}

inline BuiltFamily build_family(const FamilySpec& spec, const std::vector<std::string>& groups)
{
    const std::size_t k = groups.size();
    if (k < 2) throw DataError("at least two groups are required, found " + std::to_string(k));
    ProbabilityGrid grid;
    try {
        grid = ProbabilityGrid(spec.quantiles);
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    }

    BuiltFamily out;
    ContrastMatrix h;
    if (spec.name == "custom") {
        if (!spec.custom) throw ConfigError("family custom needs a contrast file");
        try {
            h = ContrastMatrix(spec.custom->rows, k, grid.size(), FamilyTag::Custom);
        } catch (const DomainError& e) {
            throw ConfigError(std::string("custom contrasts: ") + e.what());
        }
        out.labels = spec.custom->labels;
        for (std::size_t l = out.labels.size(); l < h.rows(); ++l) out.labels.push_back("c" + std::to_string(l + 1));
    } else {
        const auto base = base_contrasts(spec.name, k);
        const auto names = base_labels(base, groups);
        Eigen::MatrixXd effect;
        std::vector<std::string> effect_names;
        if (spec.effect == EffectSpec::MedianIqr) {
            if (grid.probs() != std::vector<double>{0.25, 0.5, 0.75})
                throw ConfigError("effect median-iqr needs the grid 0.25,0.5,0.75");
            effect = median_iqr_effect();
            effect_names = {"median", "iqr"};
        } else {
            effect = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(grid.size()), static_cast<Eigen::Index>(grid.size()));
            for (double p : grid) effect_names.push_back(probability_label(p));
        }
        h = kron_with_effect(base, effect);
        for (const auto& n : names)
            for (const auto& e : effect_names) out.labels.push_back(grid.size() == 1 ? n : n + " [" + e + "]");
    }

    auto margins = spec.margins;
    if (margins.size() == 1) margins.assign(h.rows(), margins.front());
    if (margins.size() != h.rows())
        throw ConfigError("expected 1 or " + std::to_string(h.rows()) + " margins, got " + std::to_string(spec.margins.size()));

    Direction direction = Direction::TwoSided;
    switch (spec.direction) {
    case DirectionSpec::TwoSided: break;
    case DirectionSpec::NonInferiority: direction = Direction::NonInferiority; break;
    case DirectionSpec::NonInferiorityReversed:
        direction = Direction::NonInferiority;
        h = h.negated();
        for (auto& e : margins) e = -e;
        break;
    case DirectionSpec::Equivalence: direction = Direction::Equivalence; break;
    }
    try {
        out.family = HypothesisFamily(h, margins, direction, grid);
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    }
    return out;
}

/// Moves the group labelled `reference` to position 1.
inline GroupedSample with_reference_first(const GroupedSample& data, const std::string& reference)
{
    const auto& labels = data.labels();
    const auto it = std::find(labels.begin(), labels.end(), reference);
    if (it == labels.end()) throw ConfigError("reference group '" + reference + "' does not occur in the data");
    const auto r = static_cast<std::size_t>(it - labels.begin());
    std::vector<std::vector<double>> groups{data.data()[r]};
    std::vector<std::string> names{reference};
    for (std::size_t i = 0; i < data.groups(); ++i)
        if (i != r) {
            groups.push_back(data.data()[i]);
            names.push_back(labels[i]);
        }
    return GroupedSample(std::move(groups), std::move(names));
}

enum class OutputFormat { Table, Delimited, Json };

inline OutputFormat parse_format(std::string_view s)
{
    if (s == "table") return OutputFormat::Table;
    if (s == "csv") return OutputFormat::Delimited;
    if (s == "json") return OutputFormat::Json;
    throw ConfigError("unknown format '" + std::string(s) + "' (expected table, csv, json)");
}

struct AnalysisConfig
{
    std::string input_path;
    std::string group_column = "group";
    std::string value_column = "value";
    FamilySpec family;
    std::optional<std::string> reference;
    Method method = Method::BonferroniPermutation;
    EstimatorKind cov_kind = EstimatorKind::Kernel;
    double alpha = 0.05;
    std::size_t resamples = 2000;
    std::size_t mc_samples = 100000;
    std::uint64_t seed = 1;
    OutputFormat format = OutputFormat::Table;
};

/// Runs the chosen procedure on already loaded data.
inline ResultRecord analyze(const GroupedSample& loaded, const AnalysisConfig& config)
{
    if (!(config.alpha > 0.0 && config.alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    if (config.resamples < 1) throw ConfigError("B must be at least 1");
    if (config.mc_samples < 10000) throw ConfigError("mc-samples must be at least 10000");
    const GroupedSample data = config.reference ? with_reference_first(loaded, *config.reference) : loaded;
    const auto built = build_family(config.family, data.labels());
    try {
        data.require_testable();
    } catch (const DomainError& e) {
        throw DataError(e.what());
    }

    MethodOptions opt;
    opt.cov_kind = config.cov_kind;
    opt.estimator.alpha = config.alpha;
    opt.alpha = config.alpha;
    opt.resamples = config.resamples;
    opt.mc_samples = config.mc_samples;
    const RngStream rng(config.seed, 0);
    const auto& family = built.family;
    const auto d = family.direction() == Direction::Equivalence
                       ? tost_equivalence(data, family, config.method, opt, rng)
                       : run_method(config.method, data, family, opt, rng);

    const auto q = quantile_vector(data, family.grid());
    ResultRecord rec;
    for (std::size_t l = 0; l < family.rows(); ++l) {
        ContrastResult r;
        r.label = built.labels[l];
        const auto h = family.matrix().row(l);
        for (std::size_t c = 0; c < h.size(); ++c) r.estimate += h[c] * q.values[c];
        r.margin = family.margins()[l];
        r.statistic = d.statistics.values[l];
        r.critical_value = d.critical_values[l];
        r.adjusted_p = d.adjusted_p[l];
        r.reject = d.local_reject[l];
        rec.rows.push_back(std::move(r));
    }
    rec.global_reject = d.global_reject;
    rec.method = to_string(config.method);
    rec.estimator = to_string(config.cov_kind);
    rec.direction = to_string(config.family.direction);
    rec.family = config.family.name;
    rec.alpha = config.alpha;
    rec.seed = config.seed;
    const bool resampling = config.method == Method::BonferroniPermutation || config.method == Method::BootstrapMCTP;
    rec.resamples = resampling ? d.resamples_used : 0;
    rec.resamples_failed = d.resamples_failed;
    rec.total_size = data.total_size();
    rec.groups = data.labels();
    return rec;
}

inline ResultRecord analyze(const AnalysisConfig& config, std::size_t* missing = nullptr)
{
    const auto loaded = read_grouped_csv(config.input_path, config.group_column, config.value_column);
    if (missing) *missing = loaded.missing;
    return analyze(loaded.data, config);
}

}  // namespace qmct
