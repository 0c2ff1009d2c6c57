#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "qmct/errors.hpp"
#include "qmct/quantile.hpp"
#include "qmct/special.hpp"

namespace qmct {

enum class EstimatorKind { Kernel, Bootstrap, IntervalBased };

inline std::string_view to_string(EstimatorKind kind)
{
    switch (kind) {
    case EstimatorKind::Kernel: return "kernel";
    case EstimatorKind::Bootstrap: return "bootstrap";
    case EstimatorKind::IntervalBased: return "interval";
    }
    return "?";
}

inline EstimatorKind parse_estimator(std::string_view name)
{
    if (name == "kernel") return EstimatorKind::Kernel;
    if (name == "bootstrap") return EstimatorKind::Bootstrap;
    if (name == "interval") return EstimatorKind::IntervalBased;
    throw ConfigError("unknown covariance estimator '" + std::string(name) + "' (expected kernel, bootstrap, interval)");
}

enum class BandwidthRule { Silverman, Fixed };

/// Gaussian kernel density settings used by the kernel estimator.
struct KernelConfig
{
    BandwidthRule rule = BandwidthRule::Silverman;
    double fixed_bandwidth = 0.0;
};

struct EstimatorOptions
{
    KernelConfig kernel{};
    /// Level for the interval-based estimator's order-statistic interval.
    double alpha = 0.05;
};

/// Block-diagonal estimate of the scaled covariance of the quantile vector.
/// Entry (i, a, b) estimates Sigma^(i)_{ab}; cross-group entries are zero.
class CovarianceEstimate
{
public:
    CovarianceEstimate() = default;
    CovarianceEstimate(EstimatorKind kind, std::size_t groups, std::size_t probs)
        : kind_(kind), groups_(groups), probs_(probs), entries_(groups * probs * probs, 0.0)
    {
    }

    EstimatorKind estimator() const noexcept { return kind_; }
    std::size_t groups() const noexcept { return groups_; }
    std::size_t probs() const noexcept { return probs_; }

    double& operator()(std::size_t i, std::size_t a, std::size_t b) { return entries_[(i * probs_ + a) * probs_ + b]; }
    double operator()(std::size_t i, std::size_t a, std::size_t b) const
    {
        return entries_[(i * probs_ + a) * probs_ + b];
    }

    Eigen::MatrixXd block(std::size_t i) const
    {
        Eigen::MatrixXd out(probs_, probs_);
        for (std::size_t a = 0; a < probs_; ++a)
            for (std::size_t b = 0; b < probs_; ++b) out(a, b) = (*this)(i, a, b);
        return out;
    }

    /// Full (k*m) x (k*m) matrix.
    Eigen::MatrixXd dense() const
    {
        const auto dim = static_cast<Eigen::Index>(groups_ * probs_);
        Eigen::MatrixXd out = Eigen::MatrixXd::Zero(dim, dim);
        for (std::size_t i = 0; i < groups_; ++i)
            out.block(i * probs_, i * probs_, probs_, probs_) = block(i);
        return out;
    }

    /// h' Sigma h, exploiting the block structure.
    double quadratic_form(std::span<const double> h) const
    {
        double acc = 0.0;
        for (std::size_t i = 0; i < groups_; ++i) {
            const double* hi = h.data() + i * probs_;
            for (std::size_t a = 0; a < probs_; ++a) {
                if (hi[a] == 0.0) continue;
                for (std::size_t b = 0; b < probs_; ++b) acc += hi[a] * (*this)(i, a, b) * hi[b];
            }
        }
        return acc;
    }

    std::optional<double> alpha_used;
    /// Groups whose spread estimate is exactly zero at some probability.
    std::vector<std::size_t> zero_variance_groups;

private:
    EstimatorKind kind_ = EstimatorKind::Kernel;
    std::size_t groups_ = 0;
    std::size_t probs_ = 0;
    std::vector<double> entries_;
};

/// P_{jr} weights of the bootstrap estimator: probability that the
/// ceil(n*p)-th order statistic of a bootstrap resample equals X_{j:n}.
inline std::vector<double> bootstrap_weights(std::size_t n, double p)
{
    const auto threshold = static_cast<std::int64_t>(order_index(n, p)) - 1;
    const auto size = static_cast<std::int64_t>(n);
    std::vector<double> w(n);
    double previous = binomial_cdf(size, 0.0, threshold);
    for (std::size_t j = 1; j <= n; ++j) {
        const double current = binomial_cdf(size, static_cast<double>(j) / static_cast<double>(n), threshold);
        w[j - 1] = std::max(0.0, previous - current);
        previous = current;
    }
    return w;
}

/// Order-statistic interval of the interval-based estimator.
struct OrderInterval
{
    std::size_t lower = 0;  // 1-based
    std::size_t upper = 0;  // 1-based
    double alpha_star = 0.0;
};

inline OrderInterval interval_bounds(std::size_t n, double p, double alpha)
{
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("interval estimator: alpha must lie in (0, 1)");
    const double nd = static_cast<double>(n);
    const double z = normal_quantile(1.0 - alpha / 2.0);
    const double half = z * std::sqrt(nd * p * (1.0 - p));
    const double lo = std::floor(nd * p - half);
    const double hi = std::floor(nd * p + half);
    OrderInterval out;
    out.lower = static_cast<std::size_t>(std::max(1.0, lo));
    out.upper = static_cast<std::size_t>(std::clamp(hi, 0.0, nd));
    double covered = 0.0;
    for (std::size_t j = out.lower + 1; j < out.upper; ++j)
        covered += binomial_pmf(static_cast<std::int64_t>(n), p, static_cast<std::int64_t>(j));
    out.alpha_star = 1.0 - covered;
    return out;
}

/// Silverman's rule of thumb on a sorted sample, with the fallbacks used by
/// the kernel estimator. Returns 0 when the sample has no spread at all.
inline double silverman_bandwidth(std::span<const double> sorted)
{
    const double n = static_cast<double>(sorted.size());
    double mean = 0.0;
    for (double x : sorted) mean += x;
    mean /= n;
    double ss = 0.0;
    for (double x : sorted) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / (n - 1.0));
    const double iqr = sorted_quantile(sorted, 0.75) - sorted_quantile(sorted, 0.25);
    const double spread = std::min(sd, iqr / 1.34);
    if (spread > 0.0) return 0.9 * spread * std::pow(n, -0.2);
    return sd * std::pow(n, -0.2);
}

inline double gaussian_kde(std::span<const double> sample, double bandwidth, double x)
{
    double acc = 0.0;
    for (double xi : sample) {
        const double u = (x - xi) / bandwidth;
        acc += std::exp(-0.5 * u * u);
    }
    return acc / (static_cast<double>(sample.size()) * bandwidth * std::sqrt(2.0 * std::numbers::pi));
}

/// Precomputed estimator for a fixed grid and fixed group sizes, so that
/// permuted and bootstrapped samples (which keep the sizes) reuse the
/// binomial weights and interval bounds.
class CovarianceEstimator
{
public:
    CovarianceEstimator(EstimatorKind kind, ProbabilityGrid grid, std::vector<std::size_t> sizes,
                        EstimatorOptions options = {})
        : kind_(kind), grid_(std::move(grid)), sizes_(std::move(sizes)), options_(options)
    {
        for (auto n : sizes_) {
            if (n < 2) throw DomainError("covariance estimation needs at least two observations per group");
            total_ += n;
        }
        if (kind_ == EstimatorKind::Kernel && options_.kernel.rule == BandwidthRule::Fixed &&
            !(options_.kernel.fixed_bandwidth > 0.0))
            throw DomainError("fixed kernel bandwidth must be positive");

        const std::size_t m = grid_.size();
        if (kind_ == EstimatorKind::Bootstrap) {
            std::map<std::size_t, std::vector<std::vector<double>>> cache;
            weights_.resize(sizes_.size());
            for (std::size_t i = 0; i < sizes_.size(); ++i) {
                auto [it, fresh] = cache.try_emplace(sizes_[i]);
                if (fresh)
                    for (std::size_t r = 0; r < m; ++r) it->second.push_back(bootstrap_weights(sizes_[i], grid_[r]));
                weights_[i] = it->second;
            }
        } else if (kind_ == EstimatorKind::IntervalBased) {
            intervals_.resize(sizes_.size());
            scales_.resize(sizes_.size());
            for (std::size_t i = 0; i < sizes_.size(); ++i) {
                const double n = static_cast<double>(sizes_[i]);
                for (std::size_t r = 0; r < m; ++r) {
                    const auto iv = interval_bounds(sizes_[i], grid_[r], options_.alpha);
                    if (iv.lower >= iv.upper) throw DegenerateIntervalError(i, grid_[r]);
                    const double astar = std::clamp(iv.alpha_star, 1e-12, 1.0 - 1e-12);
                    intervals_[i].push_back(iv);
                    scales_[i].push_back(std::sqrt(n) / (2.0 * normal_quantile(1.0 - astar / 2.0) + 2.0 / std::sqrt(n)));
                }
            }
        }
    }

    EstimatorKind kind() const noexcept { return kind_; }
    const ProbabilityGrid& grid() const noexcept { return grid_; }
    const std::vector<std::size_t>& sizes() const noexcept { return sizes_; }
    std::size_t total_size() const noexcept { return total_; }

    /// Estimate from sorted groups and their quantile vector.
    CovarianceEstimate operator()(const SortedGroups& sorted, const QuantileVector& q) const
    {
        if (sorted.size() != sizes_.size()) throw DomainError("group count does not match the estimator");
        for (std::size_t i = 0; i < sorted.size(); ++i)
            if (sorted[i].size() != sizes_[i]) throw DomainError("group sizes do not match the estimator");

        const std::size_t m = grid_.size();
        CovarianceEstimate est(kind_, sizes_.size(), m);
        if (kind_ == EstimatorKind::IntervalBased) est.alpha_used = options_.alpha;
        std::vector<double> spread(m);

        for (std::size_t i = 0; i < sorted.size(); ++i) {
            const auto& x = sorted[i];
            const double ratio = static_cast<double>(total_) / static_cast<double>(sizes_[i]);

            if (kind_ == EstimatorKind::Kernel) {
                const double h = options_.kernel.rule == BandwidthRule::Fixed ? options_.kernel.fixed_bandwidth
                                                                              : silverman_bandwidth(x);
                if (!(h > 0.0)) throw SingularDensityError(i, grid_[0]);
                for (std::size_t a = 0; a < m; ++a) {
                    spread[a] = gaussian_kde(x, h, q(i, a));
                    if (!(spread[a] > 0.0)) throw SingularDensityError(i, grid_[a]);
                }
                for (std::size_t a = 0; a < m; ++a)
                    for (std::size_t b = 0; b < m; ++b)
                        est(i, a, b) = ratio * (std::min(grid_[a], grid_[b]) - grid_[a] * grid_[b]) / (spread[a] * spread[b]);
                continue;
            }

            bool zero = false;
            for (std::size_t a = 0; a < m; ++a) {
                if (kind_ == EstimatorKind::Bootstrap) {
                    const auto& w = weights_[i][a];
                    const double center = q(i, a);
                    double acc = 0.0;
                    for (std::size_t j = 0; j < x.size(); ++j) {
                        const double d = x[j] - center;
                        acc += d * d * w[j];
                    }
                    spread[a] = std::sqrt(static_cast<double>(x.size()) * acc);
                } else {
                    const auto& iv = intervals_[i][a];
                    spread[a] = (x[iv.upper - 1] - x[iv.lower - 1]) * scales_[i][a];
                }
                zero = zero || spread[a] == 0.0;
            }
            if (zero) est.zero_variance_groups.push_back(i);
            for (std::size_t a = 0; a < m; ++a)
                for (std::size_t b = 0; b < m; ++b) {
                    const double pa = grid_[a], pb = grid_[b];
                    const double corr = (std::min(pa, pb) - pa * pb) / std::sqrt((pa - pa * pa) * (pb - pb * pb));
                    est(i, a, b) = ratio * spread[a] * spread[b] * corr;
                }
        }
        return est;
    }

    CovarianceEstimate operator()(const GroupedSample& data) const
    {
        const auto sorted = sorted_groups(data);
        return (*this)(sorted, quantile_vector(sorted, grid_));
    }

private:
    EstimatorKind kind_;
    ProbabilityGrid grid_;
    std::vector<std::size_t> sizes_;
    EstimatorOptions options_;
    std::size_t total_ = 0;
    std::vector<std::vector<std::vector<double>>> weights_;
    std::vector<std::vector<OrderInterval>> intervals_;
    std::vector<std::vector<double>> scales_;
};

inline CovarianceEstimate estimate_covariance(EstimatorKind kind, const GroupedSample& data, const ProbabilityGrid& grid,
                                              const EstimatorOptions& options = {})
{
    return CovarianceEstimator(kind, grid, data.sizes(), options)(data);
}

inline CovarianceEstimate kernel_estimate(const GroupedSample& data, const ProbabilityGrid& grid,
                                          const KernelConfig& cfg = {})
{
    return estimate_covariance(EstimatorKind::Kernel, data, grid, {cfg, 0.05});
}

inline CovarianceEstimate bootstrap_estimate(const GroupedSample& data, const ProbabilityGrid& grid)
{
    return estimate_covariance(EstimatorKind::Bootstrap, data, grid);
}

inline CovarianceEstimate interval_estimate(const GroupedSample& data, const ProbabilityGrid& grid, double alpha)
{
    return estimate_covariance(EstimatorKind::IntervalBased, data, grid, {{}, alpha});
}

}  // namespace qmct
