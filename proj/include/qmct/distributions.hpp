#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "qmct/errors.hpp"
#include "qmct/rng.hpp"
#include "qmct/special.hpp"

namespace qmct {

enum class DistributionKind { StdNormal, LogNormal01, ChiSq3, T2, T3 };

inline constexpr std::array<DistributionKind, 5> all_distribution_kinds{
    DistributionKind::StdNormal, DistributionKind::LogNormal01, DistributionKind::ChiSq3, DistributionKind::T2,
    DistributionKind::T3};

inline std::string_view to_string(DistributionKind kind)
{
    switch (kind) {
    case DistributionKind::StdNormal: return "normal";
    case DistributionKind::LogNormal01: return "lognormal";
    case DistributionKind::ChiSq3: return "chisq3";
    case DistributionKind::T2: return "t2";
    case DistributionKind::T3: return "t3";
    }
    return "?";
}

inline DistributionKind parse_distribution(std::string_view name)
{
    for (auto kind : all_distribution_kinds)
        if (to_string(kind) == name) return kind;
    throw ConfigError("unknown distribution '" + std::string(name) + "' (expected normal, lognormal, chisq3, t2, t3)");
}

namespace detail {

/// Root of an increasing function by bracket expansion and bisection.
template <typename F>
double solve_increasing(F&& f, double target, double lo, double hi)
{
    for (int i = 0; i < 200 && f(lo) > target; ++i) lo = lo - 2.0 * (hi - lo);
    for (int i = 0; i < 200 && f(hi) < target; ++i) hi = hi + 2.0 * (hi - lo);
    for (int i = 0; i < 300; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (f(mid) < target)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

/// One of the five error distributions of the simulation model.
class StudyDistribution
{
public:
    explicit StudyDistribution(DistributionKind kind = DistributionKind::StdNormal) : kind_(kind) {}

    DistributionKind kind() const noexcept { return kind_; }

    double cdf(double x) const
    {
        switch (kind_) {
        case DistributionKind::StdNormal: return normal_cdf(x);
        case DistributionKind::LogNormal01: return x <= 0.0 ? 0.0 : normal_cdf(std::log(x));
        case DistributionKind::ChiSq3: {
            if (x <= 0.0) return 0.0;
            const double h = 0.5 * x;
            return std::erf(std::sqrt(h)) - std::sqrt(2.0 * x / std::numbers::pi) * std::exp(-h);
        }
        case DistributionKind::T2: return 0.5 + x / (2.0 * std::sqrt(2.0 + x * x));
        case DistributionKind::T3: {
            const double s = x / std::sqrt(3.0);
            return 0.5 + (s / (1.0 + s * s) + std::atan(s)) / std::numbers::pi;
        }
        }
        return 0.0;
    }

    /// Population quantile, by bisection on the closed-form cdf.
    double quantile(double p) const
    {
        if (!(p > 0.0 && p < 1.0)) throw DomainError("quantile: probability must lie in (0, 1)");
        const bool positive = kind_ == DistributionKind::LogNormal01 || kind_ == DistributionKind::ChiSq3;
        if (positive) {
            // Solve on the log scale so the bracket never leaves the support.
            const double t = detail::solve_increasing([&](double u) { return cdf(std::exp(u)); }, p, -2.0, 2.0);
            return std::exp(t);
        }
        return detail::solve_increasing([&](double x) { return cdf(x); }, p, -2.0, 2.0);
    }

    double median() const
    {
        switch (kind_) {
        case DistributionKind::StdNormal:
        case DistributionKind::T2:
        case DistributionKind::T3: return 0.0;
        case DistributionKind::LogNormal01: return 1.0;
        case DistributionKind::ChiSq3: {
            static const double m = StudyDistribution(DistributionKind::ChiSq3).quantile(0.5);
            return m;
        }
        }
        return 0.0;
    }

    double draw(RngStream& rng) const
    {
        switch (kind_) {
        case DistributionKind::StdNormal: return rng.normal();
        case DistributionKind::LogNormal01: return std::exp(rng.normal());
        case DistributionKind::ChiSq3: return chisq(rng, 3);
        case DistributionKind::T2: return student(rng, 2);
        case DistributionKind::T3: return student(rng, 3);
        }
        return 0.0;
    }

    std::vector<double> sample(RngStream& rng, std::size_t n) const
    {
        if (n < 1) throw DomainError("sample: n must be at least 1");
        std::vector<double> out(n);
        for (auto& x : out) x = draw(rng);
        return out;
    }

private:
    static double student(RngStream& rng, int dof)
    {
        const double z = rng.normal();
        return z / std::sqrt(chisq(rng, dof) / dof);
    }

    static double chisq(RngStream& rng, int dof)
    {
        double acc = 0.0;
        for (int i = 0; i < dof; ++i) {
            const double z = rng.normal();
            acc += z * z;
        }
        return acc;
    }

    DistributionKind kind_;
};

}  // namespace qmct
