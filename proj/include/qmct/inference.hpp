#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qmct/contrasts.hpp"
#include "qmct/covariance.hpp"
#include "qmct/critvals.hpp"
#include "qmct/errors.hpp"
#include "qmct/quantile.hpp"
#include "qmct/rng.hpp"
#include "qmct/special.hpp"

namespace qmct {

enum class Method { BonferroniAsymptotic, BonferroniPermutation, AsymptoticMCTP, BootstrapMCTP };

inline constexpr std::array<Method, 4> all_methods{Method::AsymptoticMCTP, Method::BootstrapMCTP,
                                                   Method::BonferroniAsymptotic, Method::BonferroniPermutation};

inline std::string_view to_string(Method m)
{
    switch (m) {
    case Method::BonferroniAsymptotic: return "asymp-bonferroni";
    case Method::BonferroniPermutation: return "perm-bonferroni";
    case Method::AsymptoticMCTP: return "asymp-mctp";
    case Method::BootstrapMCTP: return "boot-mctp";
    }
    return "?";
}

inline Method parse_method(std::string_view name)
{
    for (auto m : all_methods)
        if (to_string(m) == name) return m;
    throw ConfigError("unknown method '" + std::string(name) +
                      "' (expected asymp-bonferroni, perm-bonferroni, asymp-mctp, boot-mctp)");
}

/// T_n(h_l, eps_l) for every row of a family.
struct TestStatistics
{
    std::vector<double> values;
    std::size_t total_size = 0;
    CovarianceEstimate covariance;
    /// Entry was 0/0 and set to 0.
    std::vector<bool> zero_over_zero;
    /// Entry had a zero denominator and a nonzero numerator.
    std::vector<bool> infinite;
};

struct DecisionSet
{
    Method method = Method::BonferroniAsymptotic;
    Direction direction = Direction::TwoSided;
    std::vector<bool> local_reject;
    bool global_reject = false;
    TestStatistics statistics;
    std::vector<double> critical_values;
    std::vector<std::optional<double>> adjusted_p;
    /// Resampling bookkeeping (zero for asymptotic methods).
    std::size_t resamples_used = 0;
    std::size_t resamples_failed = 0;
};

/// Tuning shared by all four procedures.
struct MethodOptions
{
    EstimatorKind cov_kind = EstimatorKind::Kernel;
    EstimatorOptions estimator{};
    double alpha = 0.05;
    /// Permutation / bootstrap resamples.
    std::size_t resamples = 2000;
    /// Gaussian draws for the asymptotic MCTP.
    std::size_t mc_samples = 100000;
};

namespace detail {

/// sqrt(n) * numerator / sqrt(variance) with 0/0 := 0 and x/0 := +-inf.
inline double studentize(double root_n, double numerator, double variance, bool* zero_flag = nullptr,
                         bool* inf_flag = nullptr)
{
    if (variance > 0.0 && std::isfinite(variance)) return root_n * numerator / std::sqrt(variance);
    if (numerator == 0.0) {
        if (zero_flag) *zero_flag = true;
        return 0.0;
    }
    if (inf_flag) *inf_flag = true;
    return numerator > 0.0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
}

inline void require_one_sided_or_two_sided(const HypothesisFamily& family)
{
    if (family.direction() == Direction::Equivalence)
        throw DomainError("equivalence families are tested with tost_equivalence");
}

inline void require_level(double alpha)
{
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
}

/// Contrast rows flattened for the hot resampling loops.
struct FlatContrasts
{
    explicit FlatContrasts(const ContrastMatrix& h) : rows(h.rows()), cols(h.columns()), coeffs(rows * cols)
    {
        for (std::size_t l = 0; l < rows; ++l)
            for (std::size_t c = 0; c < cols; ++c)
                coeffs[l * cols + c] = h.matrix()(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(c));
    }
    std::span<const double> row(std::size_t l) const { return {coeffs.data() + l * cols, cols}; }
    double dot(std::size_t l, std::span<const double> v) const
    {
        double acc = 0.0;
        for (std::size_t c = 0; c < cols; ++c) acc += coeffs[l * cols + c] * v[c];
        return acc;
    }

    std::size_t rows, cols;
    std::vector<double> coeffs;
};

inline void check_dimensions(const GroupedSample& data, const HypothesisFamily& family)
{
    data.require_testable();
    const auto& h = family.matrix();
    if (h.groups() != data.groups() || h.columns() != data.groups() * family.grid().size())
        throw DomainError("contrast matrix has " + std::to_string(h.columns()) + " columns, data and grid need " +
                          std::to_string(data.groups() * family.grid().size()));
}

inline double upper_fraction(std::span<const double> values, double t)
{
    std::size_t hits = 0;
    for (double v : values) hits += v >= t ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(values.size());
}

}  // namespace detail

/// T_l = sqrt(n) (h_l' q - eps_l) / sqrt(h_l' Sigma h_l).
inline TestStatistics test_statistics(const GroupedSample& data, const HypothesisFamily& family,
                                      const CovarianceEstimate& cov)
{
    detail::check_dimensions(data, family);
    if (cov.groups() != data.groups() || cov.probs() != family.grid().size())
        throw DomainError("covariance estimate does not match data and grid");

    const auto q = quantile_vector(data, family.grid());
    const detail::FlatContrasts h(family.matrix());
    const double root_n = std::sqrt(static_cast<double>(data.total_size()));

    TestStatistics out;
    out.total_size = data.total_size();
    out.covariance = cov;
    out.values.resize(h.rows);
    out.zero_over_zero.assign(h.rows, false);
    out.infinite.assign(h.rows, false);
    for (std::size_t l = 0; l < h.rows; ++l) {
        bool zero = false, inf = false;
        out.values[l] = detail::studentize(root_n, h.dot(l, q.values) - family.margins()[l],
                                           cov.quadratic_form(h.row(l)), &zero, &inf);
        out.zero_over_zero[l] = zero;
        out.infinite[l] = inf;
    }
    return out;
}

/// Resampled statistic vectors, one row per successful replicate. Kept
/// separate from the decision so several levels can share the same draws.
struct ResamplingLaw
{
    std::size_t rows = 0;
    std::vector<std::vector<double>> draws;
    std::size_t failed = 0;

    std::size_t used() const noexcept { return draws.size(); }

    /// Column l across replicates, optionally in absolute value.
    std::vector<double> column(std::size_t l, bool absolute) const
    {
        std::vector<double> out(draws.size());
        for (std::size_t b = 0; b < draws.size(); ++b) out[b] = absolute ? std::abs(draws[b][l]) : draws[b][l];
        return out;
    }

    /// max_l T_l (or max_l |T_l|) per replicate.
    std::vector<double> maxima(bool absolute) const
    {
        std::vector<double> out(draws.size());
        for (std::size_t b = 0; b < draws.size(); ++b) {
            double top = -std::numeric_limits<double>::infinity();
            for (double t : draws[b]) top = std::max(top, absolute ? std::abs(t) : t);
            out[b] = top;
        }
        return out;
    }
};

namespace detail {

enum class Scheme { Permutation, Bootstrap };

inline ResamplingLaw resample(Scheme scheme, const GroupedSample& data, const HypothesisFamily& family,
                              EstimatorKind kind, const EstimatorOptions& options, std::size_t resamples, RngStream rng)
{
    check_dimensions(data, family);
    if (resamples < 1) throw DomainError("at least one resample is required");

    const auto sizes = data.sizes();
    const CovarianceEstimator estimator(kind, family.grid(), sizes, options);
    const FlatContrasts h(family.matrix());
    const double root_n = std::sqrt(static_cast<double>(data.total_size()));

    // Bootstrap statistics are centred at the observed quantiles.
    std::vector<double> center(h.rows, 0.0);
    if (scheme == Scheme::Bootstrap) {
        const auto q = quantile_vector(data, family.grid());
        for (std::size_t l = 0; l < h.rows; ++l) center[l] = h.dot(l, q.values);
    }

    const auto pooled = pool(data);
    std::vector<double> work(pooled.size());
    SortedGroups groups(sizes.size());
    for (std::size_t i = 0; i < sizes.size(); ++i) groups[i].resize(sizes[i]);

    ResamplingLaw law;
    law.rows = h.rows;
    law.draws.reserve(resamples);
    for (std::size_t b = 0; b < resamples; ++b) {
        RngStream stream = rng.derive(b);
        if (scheme == Scheme::Permutation) {
            work = pooled;
            for (std::size_t s = work.size(); s > 1; --s) std::swap(work[s - 1], work[stream.uniform_index(s)]);
            std::size_t offset = 0;
            for (std::size_t i = 0; i < sizes.size(); ++i) {
                std::copy_n(work.begin() + static_cast<std::ptrdiff_t>(offset), sizes[i], groups[i].begin());
                offset += sizes[i];
            }
        } else {
            for (std::size_t i = 0; i < sizes.size(); ++i) {
                const auto src = data.group(i);
                for (auto& x : groups[i]) x = src[stream.uniform_index(src.size())];
            }
        }
        for (auto& g : groups) std::sort(g.begin(), g.end());

        const auto q = quantile_vector(groups, family.grid());
        CovarianceEstimate cov;
        try {
            cov = estimator(groups, q);
        } catch (const NumericalError&) {
            ++law.failed;
            continue;
        }
        std::vector<double> t(h.rows);
        for (std::size_t l = 0; l < h.rows; ++l)
            t[l] = studentize(root_n, h.dot(l, q.values) - center[l], cov.quadratic_form(h.row(l)));
        law.draws.push_back(std::move(t));
    }

    if (law.failed * 20 > resamples || law.draws.empty())
        throw NumericalError("covariance estimation failed in " + std::to_string(law.failed) + " of " +
                             std::to_string(resamples) + " resamples");
    return law;
}

}  // namespace detail

/// Permutation law of T^pi: pooled data reassigned to groups of the
/// original sizes without replacement, studentized with the same estimator.
inline ResamplingLaw permutation_law(const GroupedSample& data, const HypothesisFamily& family, EstimatorKind kind,
                                     std::size_t resamples, RngStream rng, const EstimatorOptions& options = {})
{
    return detail::resample(detail::Scheme::Permutation, data, family, kind, options, resamples, rng);
}

/// Groupwise bootstrap law of T*: each group resampled with replacement at
/// its own size, centred at the observed quantile vector.
inline ResamplingLaw bootstrap_law(const GroupedSample& data, const HypothesisFamily& family, EstimatorKind kind,
                                   std::size_t resamples, RngStream rng, const EstimatorOptions& options = {})
{
    return detail::resample(detail::Scheme::Bootstrap, data, family, kind, options, resamples, rng);
}

namespace detail {

inline DecisionSet start_decision(Method method, const HypothesisFamily& family, const TestStatistics& stats)
{
    require_one_sided_or_two_sided(family);
    if (stats.values.size() != family.rows()) throw DomainError("statistics do not match the family");
    DecisionSet d;
    d.method = method;
    d.direction = family.direction();
    d.statistics = stats;
    d.local_reject.assign(family.rows(), false);
    d.critical_values.assign(family.rows(), 0.0);
    d.adjusted_p.assign(family.rows(), std::nullopt);
    return d;
}

inline double directed(double t, Direction d) { return d == Direction::TwoSided ? std::abs(t) : t; }

inline void finish_decision(DecisionSet& d)
{
    for (std::size_t l = 0; l < d.local_reject.size(); ++l)
        d.local_reject[l] = directed(d.statistics.values[l], d.direction) > d.critical_values[l];
    d.global_reject = std::any_of(d.local_reject.begin(), d.local_reject.end(), [](bool b) { return b; });
}

}  // namespace detail

/// Bonferroni with standard normal critical values z_{1-alpha/(2r)} (two-sided) or z_{1-alpha/r}.
inline DecisionSet bonferroni_asymptotic(const TestStatistics& stats, const HypothesisFamily& family, double alpha)
{
    detail::require_level(alpha);
    auto d = detail::start_decision(Method::BonferroniAsymptotic, family, stats);
    const double r = static_cast<double>(family.rows());
    const bool two = family.direction() == Direction::TwoSided;
    const double crit = normal_quantile(1.0 - alpha / (two ? 2.0 * r : r));
    for (std::size_t l = 0; l < family.rows(); ++l) {
        d.critical_values[l] = crit;
        const double t = stats.values[l];
        const double tail = two ? 2.0 * normal_sf(std::abs(t)) : normal_sf(t);
        d.adjusted_p[l] = std::min(1.0, r * tail);
    }
    detail::finish_decision(d);
    return d;
}

/// Bonferroni with per-contrast permutation critical values from a precomputed law.
inline DecisionSet bonferroni_permutation(const TestStatistics& stats, const HypothesisFamily& family,
                                          const ResamplingLaw& law, double alpha)
{
    detail::require_level(alpha);
    auto d = detail::start_decision(Method::BonferroniPermutation, family, stats);
    const double r = static_cast<double>(family.rows());
    const bool two = family.direction() == Direction::TwoSided;
    for (std::size_t l = 0; l < family.rows(); ++l) {
        auto column = law.column(l, two);
        std::sort(column.begin(), column.end());
        d.critical_values[l] = sorted_quantile(column, 1.0 - alpha / r);
        d.adjusted_p[l] = std::min(1.0, r * detail::upper_fraction(column, detail::directed(stats.values[l], family.direction())));
    }
    d.resamples_used = law.used();
    d.resamples_failed = law.failed;
    detail::finish_decision(d);
    return d;
}

inline DecisionSet bonferroni_permutation(const GroupedSample& data, const HypothesisFamily& family,
                                          EstimatorKind cov_kind, double alpha, std::size_t resamples, RngStream rng,
                                          const EstimatorOptions& options = {})
{
    detail::require_level(alpha);
    const auto cov = estimate_covariance(cov_kind, data, family.grid(), options);
    const auto stats = test_statistics(data, family, cov);
    return bonferroni_permutation(stats, family, permutation_law(data, family, cov_kind, resamples, rng, options), alpha);
}

/// Single-step MCTP with the shared critical value from the max of N(0, R_hat).
inline DecisionSet asymptotic_mctp(const TestStatistics& stats, const HypothesisFamily& family,
                                   const MaxGaussianLaw& law, double alpha)
{
    detail::require_level(alpha);
    auto d = detail::start_decision(Method::AsymptoticMCTP, family, stats);
    const bool two = family.direction() == Direction::TwoSided;
    const double crit = law.quantile(1.0 - alpha, two);
    for (std::size_t l = 0; l < family.rows(); ++l) {
        d.critical_values[l] = crit;
        d.adjusted_p[l] = law.tail(detail::directed(stats.values[l], family.direction()), two);
    }
    detail::finish_decision(d);
    return d;
}

inline DecisionSet asymptotic_mctp(const TestStatistics& stats, const HypothesisFamily& family,
                                   const CovarianceEstimate& cov, double alpha, std::size_t mc_samples, RngStream rng)
{
    detail::require_one_sided_or_two_sided(family);
    const MaxGaussianLaw law(correlation_model(family.matrix(), cov), mc_samples, rng);
    return asymptotic_mctp(stats, family, law, alpha);
}

/// Single-step MCTP with the shared critical value from the groupwise bootstrap max law.
inline DecisionSet bootstrap_mctp(const TestStatistics& stats, const HypothesisFamily& family,
                                  const ResamplingLaw& law, double alpha)
{
    detail::require_level(alpha);
    auto d = detail::start_decision(Method::BootstrapMCTP, family, stats);
    const bool two = family.direction() == Direction::TwoSided;
    auto maxima = law.maxima(two);
    std::sort(maxima.begin(), maxima.end());
    const double crit = sorted_quantile(maxima, 1.0 - alpha);
    for (std::size_t l = 0; l < family.rows(); ++l) {
        d.critical_values[l] = crit;
        d.adjusted_p[l] = detail::upper_fraction(maxima, detail::directed(stats.values[l], family.direction()));
    }
    d.resamples_used = law.used();
    d.resamples_failed = law.failed;
    detail::finish_decision(d);
    return d;
}

inline DecisionSet bootstrap_mctp(const GroupedSample& data, const HypothesisFamily& family, EstimatorKind cov_kind,
                                  double alpha, std::size_t resamples, RngStream rng, const EstimatorOptions& options = {})
{
    detail::require_level(alpha);
    const auto cov = estimate_covariance(cov_kind, data, family.grid(), options);
    const auto stats = test_statistics(data, family, cov);
    return bootstrap_mctp(stats, family, bootstrap_law(data, family, cov_kind, resamples, rng, options), alpha);
}

/// Global decision by the max-statistic rule, independent of local_reject.
/// Per-contrast critical values use max_l T_l / c_l > 1 with 0/0 := 0.
inline bool max_rule_global(const DecisionSet& d)
{
    double top = -std::numeric_limits<double>::infinity();
    bool crossed = false;
    for (std::size_t l = 0; l < d.critical_values.size(); ++l) {
        const double t = detail::directed(d.statistics.values[l], d.direction);
        const double c = d.critical_values[l];
        if (d.method == Method::BonferroniPermutation) {
            if (c > 0.0)
                top = std::max(top, t / c);
            else if (c == 0.0)
                top = std::max(top, t == 0.0 ? 0.0 : (t > 0.0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity()));
            else
                crossed = crossed || t > c;  // ratio loses its meaning for a negative critical value
        } else {
            top = std::max(top, t - c);
        }
    }
    if (d.method == Method::BonferroniPermutation) return crossed || top > 1.0;
    return top > 0.0;
}

/// Runs several procedures on one data set, sharing the observed
/// statistics. Method m draws from rng.derive(index of m in all_methods).
inline std::vector<DecisionSet> run_methods(const GroupedSample& data, const HypothesisFamily& family,
                                            std::span<const Method> methods, const MethodOptions& opt, RngStream rng)
{
    detail::require_level(opt.alpha);
    detail::require_one_sided_or_two_sided(family);
    const auto cov = estimate_covariance(opt.cov_kind, data, family.grid(), opt.estimator);
    const auto stats = test_statistics(data, family, cov);

    std::vector<DecisionSet> out;
    for (auto m : methods) {
        const auto tag = static_cast<std::uint64_t>(std::find(all_methods.begin(), all_methods.end(), m) - all_methods.begin());
        const RngStream stream = rng.derive(tag);
        switch (m) {
        case Method::BonferroniAsymptotic: out.push_back(bonferroni_asymptotic(stats, family, opt.alpha)); break;
        case Method::AsymptoticMCTP:
            out.push_back(asymptotic_mctp(stats, family, cov, opt.alpha, opt.mc_samples, stream));
            break;
        case Method::BonferroniPermutation:
            out.push_back(bonferroni_permutation(
                stats, family, permutation_law(data, family, opt.cov_kind, opt.resamples, stream, opt.estimator), opt.alpha));
            break;
        case Method::BootstrapMCTP:
            out.push_back(bootstrap_mctp(
                stats, family, bootstrap_law(data, family, opt.cov_kind, opt.resamples, stream, opt.estimator), opt.alpha));
            break;
        }
    }
    return out;
}

inline DecisionSet run_method(Method method, const GroupedSample& data, const HypothesisFamily& family,
                              const MethodOptions& opt, RngStream rng)
{
    const Method one[] = {method};
    return run_methods(data, family, one, opt, rng).front();
}

/// Equivalence |h_l'q| < delta_l via two one-sided tests at level alpha/2
/// each: H0: h'q <= -delta and H0: -h'q <= -delta. Both sides share the
/// random stream, so resampling methods reuse the same draws.
inline DecisionSet tost_equivalence(const GroupedSample& data, const HypothesisFamily& family, Method method,
                                    const MethodOptions& opt, RngStream rng)
{
    if (family.direction() != Direction::Equivalence) throw DomainError("tost_equivalence needs an equivalence family");
    std::vector<double> lower_margins;
    for (double delta : family.margins()) {
        if (!(delta > 0.0)) throw DomainError("equivalence margins must be positive");
        lower_margins.push_back(-delta);
    }
    const HypothesisFamily lower(family.matrix(), lower_margins, Direction::NonInferiority, family.grid());
    const HypothesisFamily upper(family.matrix().negated(), lower_margins, Direction::NonInferiority, family.grid());

    MethodOptions half = opt;
    half.alpha = opt.alpha / 2.0;
    const auto lo = run_method(method, data, lower, half, rng);
    const auto hi = run_method(method, data, upper, half, rng);

    DecisionSet d = lo;
    d.direction = Direction::Equivalence;
    for (std::size_t l = 0; l < family.rows(); ++l) {
        d.local_reject[l] = lo.local_reject[l] && hi.local_reject[l];
        // Report the binding side.
        if (hi.statistics.values[l] - hi.critical_values[l] < lo.statistics.values[l] - lo.critical_values[l]) {
            d.statistics.values[l] = hi.statistics.values[l];
            d.critical_values[l] = hi.critical_values[l];
        }
        if (lo.adjusted_p[l] && hi.adjusted_p[l]) d.adjusted_p[l] = std::max(*lo.adjusted_p[l], *hi.adjusted_p[l]);
    }
    d.resamples_failed = lo.resamples_failed + hi.resamples_failed;
    d.global_reject = std::any_of(d.local_reject.begin(), d.local_reject.end(), [](bool b) { return b; });
    return d;
}

}  // namespace qmct
