#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "qmct/errors.hpp"

namespace qmct {

/// ceil(x) that treats values within rounding noise of an integer as that
/// integer, so n*p = 3.0000000000000004 maps to 3.
inline std::size_t ceil_count(double x)
{
    const double r = std::round(x);
    if (std::abs(x - r) <= 1e-9 * std::max(1.0, std::abs(x))) return static_cast<std::size_t>(std::max(0.0, r));
    return static_cast<std::size_t>(std::max(0.0, std::ceil(x)));
}

/// 1-based index of the order statistic that realises the left-continuous
/// inverse of the empirical cdf: the ceil(n*p)-th smallest value.
inline std::size_t order_index(std::size_t n, double p)
{
    return std::clamp<std::size_t>(ceil_count(static_cast<double>(n) * p), 1, n);
}

/// Empirical p-quantile of an already sorted sample.
inline double sorted_quantile(std::span<const double> sorted, double p)
{
    return sorted[order_index(sorted.size(), p) - 1];
}

/// Empirical p-quantile, smallest x with F_n(x) >= p. No interpolation.
inline double empirical_quantile(std::span<const double> sample, double p)
{
    if (sample.empty()) throw DomainError("empirical_quantile: empty sample");
    if (!(p > 0.0 && p < 1.0)) throw DomainError("empirical_quantile: probability must lie in (0, 1)");
    std::vector<double> work(sample.begin(), sample.end());
    const auto nth = work.begin() + static_cast<std::ptrdiff_t>(order_index(work.size(), p) - 1);
    std::nth_element(work.begin(), nth, work.end());
    return *nth;
}

/// Strictly increasing probabilities p_1 < ... < p_m inside (0, 1).
class ProbabilityGrid
{
public:
    ProbabilityGrid() = default;
    ProbabilityGrid(std::initializer_list<double> probs) : ProbabilityGrid(std::vector<double>(probs)) {}
    explicit ProbabilityGrid(std::vector<double> probs) : probs_(std::move(probs))
    {
        if (probs_.empty()) throw DomainError("probability grid must not be empty");
        for (std::size_t j = 0; j < probs_.size(); ++j) {
            if (!(probs_[j] > 0.0 && probs_[j] < 1.0))
                throw DomainError("probability grid entries must lie in (0, 1)");
            if (j > 0 && !(probs_[j] > probs_[j - 1]))
                throw DomainError("probability grid must be strictly increasing");
        }
    }

    std::size_t size() const noexcept { return probs_.size(); }
    double operator[](std::size_t j) const { return probs_[j]; }
    const std::vector<double>& probs() const noexcept { return probs_; }
    auto begin() const noexcept { return probs_.begin(); }
    auto end() const noexcept { return probs_.end(); }

    friend bool operator==(const ProbabilityGrid&, const ProbabilityGrid&) = default;

private:
    std::vector<double> probs_{0.5};
};

/// k independent samples with labels. Structural checks only (nonempty,
/// finite); the testing pipeline additionally calls require_testable().
class GroupedSample
{
public:
    GroupedSample() = default;
    explicit GroupedSample(std::vector<std::vector<double>> groups, std::vector<std::string> labels = {})
        : groups_(std::move(groups)), labels_(std::move(labels))
    {
        if (groups_.empty()) throw DomainError("grouped sample needs at least one group");
        if (labels_.empty())
            for (std::size_t i = 0; i < groups_.size(); ++i) labels_.push_back(std::to_string(i + 1));
        if (labels_.size() != groups_.size()) throw DomainError("one label per group required");
        for (std::size_t i = 0; i < groups_.size(); ++i) {
            if (groups_[i].empty()) throw DomainError("group '" + labels_[i] + "' is empty");
            for (double x : groups_[i])
                if (!std::isfinite(x)) throw DomainError("group '" + labels_[i] + "' contains a non-finite value");
        }
    }

    std::size_t groups() const noexcept { return groups_.size(); }
    std::size_t size(std::size_t i) const { return groups_[i].size(); }
    std::size_t total_size() const noexcept
    {
        std::size_t n = 0;
        for (const auto& g : groups_) n += g.size();
        return n;
    }
    std::vector<std::size_t> sizes() const
    {
        std::vector<std::size_t> out;
        for (const auto& g : groups_) out.push_back(g.size());
        return out;
    }

    std::span<const double> group(std::size_t i) const { return groups_[i]; }
    const std::vector<std::vector<double>>& data() const noexcept { return groups_; }
    const std::vector<std::string>& labels() const noexcept { return labels_; }

    /// k >= 2 and n_i >= 2 for every group.
    void require_testable() const
    {
        if (groups_.size() < 2) throw DomainError("at least two groups are required");
        for (std::size_t i = 0; i < groups_.size(); ++i)
            if (groups_[i].size() < 2)
                throw DomainError("group '" + labels_[i] + "' needs at least two observations");
    }

private:
    std::vector<std::vector<double>> groups_;
    std::vector<std::string> labels_;
};

/// Group-major vector (q_11, ..., q_1m, q_21, ..., q_km).
struct QuantileVector
{
    std::vector<double> values;
    std::size_t groups = 0;
    std::size_t probs = 0;

    double operator()(std::size_t i, std::size_t j) const { return values[i * probs + j]; }
};

/// Each group sorted ascending; the form every estimator works on.
using SortedGroups = std::vector<std::vector<double>>;

inline SortedGroups sorted_groups(const GroupedSample& data)
{
    SortedGroups out = data.data();
    for (auto& g : out) std::sort(g.begin(), g.end());
    return out;
}

inline QuantileVector quantile_vector(const SortedGroups& sorted, const ProbabilityGrid& grid)
{
    QuantileVector q{std::vector<double>(sorted.size() * grid.size()), sorted.size(), grid.size()};
    for (std::size_t i = 0; i < sorted.size(); ++i)
        for (std::size_t j = 0; j < grid.size(); ++j) q.values[i * grid.size() + j] = sorted_quantile(sorted[i], grid[j]);
    return q;
}

inline QuantileVector quantile_vector(const GroupedSample& data, const ProbabilityGrid& grid)
{
    return quantile_vector(sorted_groups(data), grid);
}

/// Concatenation of all groups in group order.
inline std::vector<double> pool(const GroupedSample& data)
{
    std::vector<double> out;
    out.reserve(data.total_size());
    for (const auto& g : data.data()) out.insert(out.end(), g.begin(), g.end());
    return out;
}

}  // namespace qmct
