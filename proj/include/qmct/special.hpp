#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "qmct/errors.hpp"

namespace qmct {

inline double normal_pdf(double x) noexcept
{
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

/// Standard normal distribution function.
inline double normal_cdf(double x) noexcept
{
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

/// Upper tail 1 - Phi(x) without cancellation.
inline double normal_sf(double x) noexcept
{
    return 0.5 * std::erfc(x / std::numbers::sqrt2);
}

/// beta-quantile z_beta of the standard normal distribution.
///
/// Acklam's rational approximation (relative error ~1e-9) followed by one
/// Halley step on normal_cdf, which brings the error to double precision
/// over the whole open unit interval.
inline double normal_quantile(double beta)
{
    if (!(beta > 0.0 && beta < 1.0))
        throw DomainError("normal_quantile: probability must lie in (0, 1), got " + std::to_string(beta));

    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                   1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                   6.680131188771972e+01,  -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                   -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                   3.754408661907416e+00};
    constexpr double p_low = 0.02425;

    double x;
    if (beta < p_low) {
        const double q = std::sqrt(-2.0 * std::log(beta));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (beta <= 1.0 - p_low) {
        const double q = beta - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log1p(-beta));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }

    // Halley refinement; work in the tail that keeps relative precision.
    const double e = beta < 0.5 ? normal_cdf(x) - beta : (1.0 - beta) - normal_sf(x);
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    return x - u / (1.0 + 0.5 * x * u);
}

namespace detail {

inline double log_sum_exp(const std::vector<double>& logs)
{
    if (logs.empty()) return -std::numeric_limits<double>::infinity();
    const double top = *std::max_element(logs.begin(), logs.end());
    if (!std::isfinite(top)) return top;
    double acc = 0.0;
    for (double l : logs) acc += std::exp(l - top);
    return top + std::log(acc);
}

inline double log_choose(std::int64_t n, std::int64_t k)
{
    k = std::min(k, n - k);
    double acc = 0.0;
    for (std::int64_t j = 1; j <= k; ++j)
        acc += std::log(static_cast<double>(n - k + j) / static_cast<double>(j));
    return acc;
}

}  // namespace detail

/// P(X = k) for X ~ Bin(n, p).
inline double binomial_pmf(std::int64_t n, double p, std::int64_t k)
{
    if (n < 0 || !(p >= 0.0 && p <= 1.0)) throw DomainError("binomial_pmf: invalid parameters");
    if (k < 0 || k > n) return 0.0;
    if (p == 0.0) return k == 0 ? 1.0 : 0.0;
    if (p == 1.0) return k == n ? 1.0 : 0.0;
    const double lp = detail::log_choose(n, k) + static_cast<double>(k) * std::log(p) +
                      static_cast<double>(n - k) * std::log1p(-p);
    return std::exp(lp);
}

/// P(X <= k) for X ~ Bin(n, p), summed term by term in log space.
inline double binomial_cdf(std::int64_t n, double p, std::int64_t k)
{
    if (n < 0 || !(p >= 0.0 && p <= 1.0)) throw DomainError("binomial_cdf: invalid parameters");
    if (k < 0) return 0.0;
    if (k >= n) return 1.0;
    if (p == 0.0) return 1.0;
    if (p == 1.0) return 0.0;

    const double log_odds = std::log(p) - std::log1p(-p);
    std::vector<double> logs;
    logs.reserve(static_cast<std::size_t>(k) + 1);
    double term = static_cast<double>(n) * std::log1p(-p);
    logs.push_back(term);
    for (std::int64_t j = 1; j <= k; ++j) {
        term += std::log(static_cast<double>(n - j + 1) / static_cast<double>(j)) + log_odds;
        logs.push_back(term);
    }
    return std::clamp(std::exp(detail::log_sum_exp(logs)), 0.0, 1.0);
}

}  // namespace qmct
