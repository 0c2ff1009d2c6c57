#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include "qmct/contrasts.hpp"
#include "qmct/covariance.hpp"
#include "qmct/critvals.hpp"
#include "qmct/distributions.hpp"
#include "qmct/errors.hpp"
#include "qmct/inference.hpp"
#include "qmct/quantile.hpp"
#include "qmct/rng.hpp"
#include "qmct/special.hpp"

// Brute-force reference implementations. Deliberately slow and simple; they
// share as little code as possible with the routines they check.
namespace qmct::oracles {

/// Smallest x in [lo, hi] with cdf(x) >= beta, by plain bisection.
/// For a step cdf this is the jump point reaching beta.
inline double cdf_inverse_bisect(const std::function<double(double)>& cdf, double beta, double lo, double hi)
{
    if (!(lo < hi)) throw DomainError("cdf_inverse_bisect: empty bracket");
    if (!(cdf(lo) < beta) || !(cdf(hi) >= beta)) throw DomainError("cdf_inverse_bisect: beta is not bracketed");
    const double width = hi - lo;
    for (int it = 0; it < 400 && hi - lo > 1e-12 * width; ++it) {
        const double mid = lo + 0.5 * (hi - lo);
        if (mid <= lo || mid >= hi) break;
        if (cdf(mid) >= beta)
            hi = mid;
        else
            lo = mid;
    }
    return hi;
}

/// erf by its Maclaurin series in extended precision; accurate for |x| < 5.
inline double erf_series(double x)
{
    const long double z = x;
    long double term = z, sum = z;
    for (int n = 1; n < 400; ++n) {
        term *= -z * z / n;
        const long double add = term / (2 * n + 1);
        sum += add;
        if (std::abs(add) < 1e-30L * std::abs(sum)) break;
    }
    return static_cast<double>(2.0L * sum / std::sqrt(std::numbers::pi_v<long double>));
}

inline double normal_cdf_series(double x)
{
    if (x < -8.0) return 0.0;
    if (x > 8.0) return 1.0;
    return 0.5 * (1.0 + erf_series(x / std::numbers::sqrt2));
}

/// level-quantile of max of r independent N(0,1) (or of their absolute values):
/// Phi(q)^r = level, or (Phi(q) - Phi(-q))^r = level.
inline double independent_max_quantile(std::size_t r, double level, bool absolute)
{
    if (r < 1 || !(level > 0.0 && level < 1.0)) throw DomainError("independent_max_quantile: bad arguments");
    const double target = std::pow(level, 1.0 / static_cast<double>(r));
    if (absolute)
        return cdf_inverse_bisect([](double q) { return q <= 0.0 ? 0.0 : 2.0 * normal_cdf_series(q) - 1.0; }, target,
                                  0.0, 8.0);
    return cdf_inverse_bisect(normal_cdf_series, target, -8.0, 8.0);
}

/// Every distinct assignment of the pooled observations to groups of the
/// original sizes, with the full permutation statistic vector of each.
struct EnumeratedPermutationLaw
{
    std::vector<std::vector<double>> statistics;
    std::size_t assignments = 0;
    std::size_t failed = 0;

    std::vector<double> sorted_column(std::size_t l, bool absolute) const
    {
        std::vector<double> out;
        for (const auto& t : statistics) out.push_back(absolute ? std::abs(t[l]) : t[l]);
        std::sort(out.begin(), out.end());
        return out;
    }
};

inline EnumeratedPermutationLaw enumerate_permutation_law(const GroupedSample& data, const HypothesisFamily& family,
                                                          EstimatorKind cov_kind, const EstimatorOptions& options = {})
{
    data.require_testable();
    if (data.total_size() > 12) throw DomainError("permutation enumeration is limited to n <= 12");
    const auto sizes = data.sizes();
    const auto pooled = pool(data);
    const auto& grid = family.grid();
    const auto& h = family.matrix().matrix();
    const double root_n = std::sqrt(static_cast<double>(pooled.size()));

    // Label sequences in lexicographic order visit each multiset permutation once.
    std::vector<std::size_t> labels;
    for (std::size_t i = 0; i < sizes.size(); ++i) labels.insert(labels.end(), sizes[i], i);

    EnumeratedPermutationLaw law;
    do {
        ++law.assignments;
        std::vector<std::vector<double>> groups(sizes.size());
        for (std::size_t s = 0; s < pooled.size(); ++s) groups[labels[s]].push_back(pooled[s]);
        const GroupedSample permuted(groups);
        CovarianceEstimate cov;
        try {
            cov = estimate_covariance(cov_kind, permuted, grid, options);
        } catch (const NumericalError&) {
            ++law.failed;
            continue;
        }
        std::vector<double> q;
        for (std::size_t i = 0; i < groups.size(); ++i)
            for (double p : grid) q.push_back(empirical_quantile(groups[i], p));
        const Eigen::MatrixXd sigma = cov.dense();
        std::vector<double> t(family.rows());
        for (std::size_t l = 0; l < family.rows(); ++l) {
            double num = 0.0, var = 0.0;
            for (std::size_t a = 0; a < q.size(); ++a) {
                const auto la = static_cast<Eigen::Index>(l), ia = static_cast<Eigen::Index>(a);
                num += h(la, ia) * q[a];
                for (std::size_t b = 0; b < q.size(); ++b)
                    var += h(la, ia) * sigma(ia, static_cast<Eigen::Index>(b)) * h(la, static_cast<Eigen::Index>(b));
            }
            if (var > 0.0)
                t[l] = root_n * num / std::sqrt(var);
            else
                t[l] = num == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), num);
        }
        law.statistics.push_back(std::move(t));
    } while (std::next_permutation(labels.begin(), labels.end()));
    if (law.statistics.empty()) throw NumericalError("covariance estimation failed for every assignment");
    return law;
}

/// Exact beta-quantiles of T^pi_l (|T^pi_l| for two-sided families) under
/// the uniform law on assignments.
inline std::vector<double> enumerate_permutation_quantile(const GroupedSample& data, const HypothesisFamily& family,
                                                          EstimatorKind cov_kind, double beta,
                                                          const EstimatorOptions& options = {})
{
    if (!(beta > 0.0 && beta < 1.0)) throw DomainError("beta must lie in (0, 1)");
    const auto law = enumerate_permutation_law(data, family, cov_kind, options);
    const bool absolute = family.direction() == Direction::TwoSided;
    std::vector<double> out;
    for (std::size_t l = 0; l < family.rows(); ++l) {
        const auto column = law.sorted_column(l, absolute);
        const auto n = column.size();
        std::size_t k = static_cast<std::size_t>(std::ceil(static_cast<double>(n) * beta - 1e-9));
        k = std::clamp<std::size_t>(k, 1, n);
        out.push_back(column[k - 1]);
    }
    return out;
}

/// Largest gap between the atom at x and its neighbouring atoms of a sorted law.
inline double atom_spacing(const std::vector<double>& sorted, double x)
{
    std::vector<double> atoms = sorted;
    atoms.erase(std::unique(atoms.begin(), atoms.end()), atoms.end());
    const auto it = std::lower_bound(atoms.begin(), atoms.end(), x);
    double gap = 0.0;
    if (it != atoms.end() && std::next(it) != atoms.end()) gap = std::max(gap, *std::next(it) - *it);
    if (it != atoms.begin()) gap = std::max(gap, (it == atoms.end() ? atoms.back() : *it) - *std::prev(it));
    return gap;
}

/// Kolmogorov distance between two empirical laws.
inline double ks_distance(std::vector<double> a, std::vector<double> b)
{
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
    }
    return d;
}

struct Check
{
    std::string name;
    double value = 0.0;
    double expected = 0.0;
    double tolerance = 0.0;
    bool ok() const { return std::abs(value - expected) <= tolerance; }
};

inline std::vector<Check> selftest_checks()
{
    std::vector<Check> checks;
    const auto bisect_quantile = [](double beta) { return cdf_inverse_bisect(normal_cdf_series, beta, -8.0, 8.0); };
    for (double beta : {0.5, 0.9, 0.975, 0.99, 1.0 - 0.05 / 3.0, 1.0 - 0.05 / 6.0})
        checks.push_back({"normal_quantile(" + std::to_string(beta) + ")", normal_quantile(beta), bisect_quantile(beta), 1e-8});
    for (double x : {-3.0, -1.0, 0.0, 1.959964, 2.5})
        checks.push_back({"normal_cdf(" + std::to_string(x) + ")", normal_cdf(x), normal_cdf_series(x), 1e-12});

    // Binomial cdf must telescope into the pmf and reach one.
    for (auto [n, p] : {std::pair<std::int64_t, double>{15, 0.5}, {40, 0.25}, {250, 0.75}}) {
        double worst = 0.0, total = 0.0;
        for (std::int64_t k = 0; k <= n; ++k) {
            const double pmf = binomial_pmf(n, p, k);
            total += pmf;
            worst = std::max(worst, std::abs(binomial_cdf(n, p, k) - binomial_cdf(n, p, k - 1) - pmf));
        }
        checks.push_back({"binomial telescoping n=" + std::to_string(n), worst, 0.0, 1e-12});
        checks.push_back({"binomial total n=" + std::to_string(n), total, 1.0, 1e-12});
    }

    const StudyDistribution chisq3(DistributionKind::ChiSq3);
    checks.push_back({"chisq3 median", chisq3.median(),
                      cdf_inverse_bisect([&](double x) { return chisq3.cdf(x); }, 0.5, 0.0, 20.0), 1e-9});
    for (auto kind : all_distribution_kinds) {
        const StudyDistribution d(kind);
        for (double p : {0.25, 0.75})
            checks.push_back({std::string(to_string(kind)) + " quantile(" + std::to_string(p) + ")", d.quantile(p),
                              cdf_inverse_bisect([&](double x) { return d.cdf(x); }, p, -50.0, 50.0), 1e-8});
    }

    CorrelationModel identity{Eigen::MatrixXd::Identity(2, 2)};
    checks.push_back({"max |N(0,I2)| 95%", max_gaussian_quantile(identity, 0.95, true, 1000000, RngStream(7, 0)),
                      independent_max_quantile(2, 0.95, true), 0.01});

    // Tiny permutation law: enumeration against the sampler.
    const GroupedSample tiny({{0.3, -1.2, 2.1}, {0.8, 1.7, -0.4}});
    const HypothesisFamily two(dunnett(2), {0.0}, Direction::TwoSided, ProbabilityGrid{0.5});
    const auto exact_law = enumerate_permutation_law(tiny, two, EstimatorKind::Bootstrap);
    checks.push_back({"enumerated assignments C(6,3)", static_cast<double>(exact_law.assignments), 20.0, 0.0});
    const auto exact = enumerate_permutation_quantile(tiny, two, EstimatorKind::Bootstrap, 0.9).front();
    auto mc = permutation_law(tiny, two, EstimatorKind::Bootstrap, 20000, RngStream(11, 0)).column(0, true);
    std::sort(mc.begin(), mc.end());
    checks.push_back({"permutation 0.9-quantile", sorted_quantile(mc, 0.9), exact,
                      atom_spacing(exact_law.sorted_column(0, true), exact)});
    return checks;
}

/// Runs the oracle suite, one line per check; true if everything passed.
inline bool run_selftest(std::ostream& out)
{
    bool all = true;
    for (const auto& c : selftest_checks()) {
        out << (c.ok() ? "ok   " : "FAIL ") << c.name << std::setprecision(12) << "  value=" << c.value
            << " expected=" << c.expected << " tol=" << c.tolerance << '\n';
        all = all && c.ok();
    }
    return all;
}

}  // namespace qmct::oracles
