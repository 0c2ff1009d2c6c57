#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <ostream>
#include <string>
#include <type_traits>
#include <vector>

#include <nlohmann/json.hpp>

#include "qmct/analysis.hpp"
#include "qmct/distributions.hpp"
#include "qmct/errors.hpp"
#include "qmct/inference.hpp"
#include "qmct/report.hpp"
#include "qmct/simlab.hpp"

namespace qmct {

/// Simulation grid read from a JSON config. List-valued fields are
/// cross-multiplied; every method of a cell sees the same data sets.
struct StudyConfig
{
    std::vector<DistributionKind> distributions{DistributionKind::StdNormal};
    std::vector<std::vector<double>> sigmas{{1, 1, 1, 1}};
    std::vector<std::vector<std::size_t>> sample_sizes{{15, 15, 15, 15}};
    /// Location shift of the last group.
    std::vector<double> shifts{0.0};
    std::vector<std::string> families{"dunnett"};
    std::vector<EffectSpec> effects{EffectSpec::PerQuantile};
    std::vector<DirectionSpec> directions{DirectionSpec::TwoSided};
    std::vector<double> margins{0.0};
    std::vector<EstimatorKind> cov_kinds{EstimatorKind::Kernel};
    std::vector<Method> methods{all_methods.begin(), all_methods.end()};
    double alpha = 0.05;
    std::size_t n_sim = 1000;
    std::size_t resamples = 500;
    std::size_t mc_samples = 100000;
    std::uint64_t seed = 1;
};

namespace detail {

template <typename T, typename F>
std::vector<T> read_list(const nlohmann::json& j, const char* key, std::vector<T> fallback, F&& convert)
{
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (!v.is_array()) throw ConfigError(std::string("'") + key + "' must be a list");
    std::vector<T> out;
    for (const auto& e : v) out.push_back(convert(e));
    return out;
}

}  // namespace detail

inline StudyConfig parse_study_config(const nlohmann::json& j)
{
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    static const char* known[] = {"distributions", "sigmas", "sample_sizes", "shifts", "families", "effects", "directions",
                                  "margins", "cov_kinds", "methods", "alpha", "n_sim", "B", "mc_samples", "seed"};
    for (const auto& [key, value] : j.items())
        if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) == std::end(known))
            throw ConfigError("unknown config key '" + key + "'");

    StudyConfig c;
    try {
        const auto str = [](const nlohmann::json& e) { return e.get<std::string>(); };
        c.distributions = detail::read_list(j, "distributions", c.distributions,
                                            [&](const nlohmann::json& e) { return parse_distribution(str(e)); });
        c.sigmas = detail::read_list(j, "sigmas", c.sigmas,
                                     [](const nlohmann::json& e) { return e.get<std::vector<double>>(); });
        c.sample_sizes = detail::read_list(j, "sample_sizes", c.sample_sizes,
                                           [](const nlohmann::json& e) { return e.get<std::vector<std::size_t>>(); });
        c.shifts = detail::read_list(j, "shifts", c.shifts, [](const nlohmann::json& e) { return e.get<double>(); });
        c.families = detail::read_list(j, "families", c.families, str);
        c.effects = detail::read_list(j, "effects", c.effects, [&](const nlohmann::json& e) { return parse_effect(str(e)); });
        c.directions = detail::read_list(j, "directions", c.directions,
                                         [&](const nlohmann::json& e) { return parse_direction(str(e)); });
        c.margins = detail::read_list(j, "margins", c.margins, [](const nlohmann::json& e) { return e.get<double>(); });
        c.cov_kinds = detail::read_list(j, "cov_kinds", c.cov_kinds,
                                        [&](const nlohmann::json& e) { return parse_estimator(str(e)); });
        c.methods = detail::read_list(j, "methods", c.methods, [&](const nlohmann::json& e) { return parse_method(str(e)); });
        if (j.contains("alpha")) c.alpha = j.at("alpha").get<double>();
        if (j.contains("n_sim")) c.n_sim = j.at("n_sim").get<std::size_t>();
        if (j.contains("B")) c.resamples = j.at("B").get<std::size_t>();
        if (j.contains("mc_samples")) c.mc_samples = j.at("mc_samples").get<std::size_t>();
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    } catch (const DomainError& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }

    if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    if (c.n_sim < 1) throw ConfigError("n_sim must be at least 1");
    if (c.resamples < 1) throw ConfigError("B must be at least 1");
    if (c.mc_samples < 10000) throw ConfigError("mc_samples must be at least 10000");
    for (const auto& s : c.sigmas)
        for (double v : s)
            if (!(v > 0.0)) throw ConfigError("sigmas must be positive");
    for (const auto& n : c.sample_sizes)
        for (auto v : n)
            if (v < 2) throw ConfigError("sample sizes must be at least 2");
    return c;
}

inline StudyConfig read_study_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    try {
        return parse_study_config(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config '" + path + "': " + e.what());
    }
}

/// One cell of the grid, methods excluded.
struct StudyCell
{
    std::size_t id = 0;
    DistributionKind distribution = DistributionKind::StdNormal;
    std::vector<double> sigmas;
    std::vector<std::size_t> sample_sizes;
    double shift = 0.0;
    std::string family;
    EffectSpec effect = EffectSpec::PerQuantile;
    DirectionSpec direction = DirectionSpec::TwoSided;
    double margin = 0.0;
    EstimatorKind cov_kind = EstimatorKind::Kernel;
};

/// Cells in lexicographic order of the config lists (first list slowest).
inline std::vector<StudyCell> expand_cells(const StudyConfig& c)
{
    std::vector<StudyCell> cells;
    for (auto dist : c.distributions)
        for (const auto& sig : c.sigmas)
            for (const auto& n : c.sample_sizes)
                for (double shift : c.shifts)
                    for (const auto& fam : c.families)
                        for (auto eff : c.effects)
                            for (auto dir : c.directions)
                                for (double margin : c.margins)
                                    for (auto cov : c.cov_kinds)
                                        cells.push_back({cells.size(), dist, sig, n, shift, fam, eff, dir, margin, cov});
    return cells;
}

inline Scenario make_scenario(const StudyConfig& c, const StudyCell& cell)
{
    if (cell.sigmas.size() != cell.sample_sizes.size())
        throw ConfigError("sigmas and sample_sizes must have the same length in every combination");
    Scenario s;
    s.distribution = StudyDistribution(cell.distribution);
    s.sigmas = cell.sigmas;
    s.sample_sizes = cell.sample_sizes;
    s.mus.assign(cell.sample_sizes.size(), 0.0);
    s.mus.back() = cell.shift;

    FamilySpec spec;
    spec.name = cell.family;
    spec.effect = cell.effect;
    spec.direction = cell.direction;
    spec.margins = {cell.margin};
    spec.quantiles = cell.effect == EffectSpec::MedianIqr ? std::vector<double>{0.25, 0.5, 0.75} : std::vector<double>{0.5};
    std::vector<std::string> names;
    for (std::size_t i = 0; i < cell.sample_sizes.size(); ++i) names.push_back(std::to_string(i + 1));
    try {
        s.family = build_family(spec, names).family;
    } catch (const DataError& e) {
        throw ConfigError(e.what());
    }
    s.cov_kind = cell.cov_kind;
    s.alpha = c.alpha;
    s.resamples = c.resamples;
    s.mc_samples = c.mc_samples;
    s.n_sim = c.n_sim;
    s.seed = c.seed;
    s.cell_id = cell.id;
    return s;
}

struct StudyRow
{
    StudyCell cell;
    ScenarioResult result;
};

inline std::vector<StudyRow> run_study(const StudyConfig& c, std::size_t threads, std::ostream* progress = nullptr)
{
    std::vector<StudyRow> rows;
    const auto cells = expand_cells(c);
    for (const auto& cell : cells) {
        const auto scenario = make_scenario(c, cell);
        auto results = run_cells(scenario, c.methods, threads);
        if (progress)
            *progress << "cell " << cell.id + 1 << "/" << cells.size() << " done in " << results.front().wall_time.count()
                      << " s\n";
        for (auto& r : results) rows.push_back({cell, std::move(r)});
    }
    return rows;
}

/// Column order of the delimited simulate output.
inline constexpr const char* study_columns =
    "cell,distribution,sigmas,sample_sizes,shift,family,effect,direction,margin,cov,method,alpha,n_sim,B,"
    "n_effective,failed,global_null,fwer,global_rate,fwer_or_power_global,local_rates";

namespace detail {

template <typename T>
std::string join(const std::vector<T>& v, const char* sep)
{
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += sep;
        if constexpr (std::is_floating_point_v<T>)
            out += format_number(v[i]);
        else
            out += std::to_string(v[i]);
    }
    return out;
}

}  // namespace detail

inline void write_study_delimited(std::ostream& out, const StudyConfig& c, const std::vector<StudyRow>& rows)
{
    out << "# n_sim=" << c.n_sim << " B=" << c.resamples << " mc_samples=" << c.mc_samples << " seed=" << c.seed << '\n';
    out << study_columns << '\n';
    for (const auto& row : rows) {
        const auto& cell = row.cell;
        const auto& r = row.result;
        out << cell.id << ',' << to_string(cell.distribution) << ',' << detail::join(cell.sigmas, ";") << ','
            << detail::join(cell.sample_sizes, ";") << ',' << format_number(cell.shift) << ',' << cell.family << ','
            << to_string(cell.effect) << ',' << to_string(cell.direction) << ',' << format_number(cell.margin) << ','
            << to_string(cell.cov_kind) << ',' << to_string(r.method) << ',' << format_number(c.alpha) << ','
            << c.n_sim << ',' << c.resamples << ',' << r.n_effective << ',' << r.failed << ','
            << (r.global_null_true ? 1 : 0) << ',' << format_number(r.fwer) << ',' << format_number(r.global_rate)
            << ',' << format_number(r.fwer_or_power_global) << ',' << detail::join(r.local_rates, ";") << '\n';
    }
}

inline nlohmann::ordered_json study_to_json(const StudyConfig& c, const std::vector<StudyRow>& rows)
{
    nlohmann::ordered_json j;
    j["n_sim"] = c.n_sim;
    j["B"] = c.resamples;
    j["mc_samples"] = c.mc_samples;
    j["seed"] = c.seed;
    j["alpha"] = c.alpha;
    j["rows"] = nlohmann::ordered_json::array();
    for (const auto& row : rows) {
        const auto& cell = row.cell;
        const auto& r = row.result;
        nlohmann::ordered_json o;
        o["cell"] = cell.id;
        o["distribution"] = to_string(cell.distribution);
        o["sigmas"] = cell.sigmas;
        o["sample_sizes"] = cell.sample_sizes;
        o["shift"] = cell.shift;
        o["family"] = cell.family;
        o["effect"] = to_string(cell.effect);
        o["direction"] = to_string(cell.direction);
        o["margin"] = cell.margin;
        o["cov"] = to_string(cell.cov_kind);
        o["method"] = to_string(r.method);
        o["n_effective"] = r.n_effective;
        o["failed"] = r.failed;
        o["global_null"] = r.global_null_true;
        o["fwer_count"] = r.fwer_count;
        o["global_count"] = r.global_count;
        o["local_counts"] = r.local_counts;
        o["fwer"] = r.fwer;
        o["global_rate"] = r.global_rate;
        o["fwer_or_power_global"] = r.fwer_or_power_global;
        o["local_rates"] = r.local_rates;
        j["rows"].push_back(std::move(o));
    }
    return j;
}

}  // namespace qmct
