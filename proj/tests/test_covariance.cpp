#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "qmct/covariance.hpp"
#include "qmct/distributions.hpp"
#include "qmct/rng.hpp"

using namespace qmct;

namespace {

GroupedSample normal_groups(std::vector<std::size_t> sizes, std::uint64_t seed)
{
    RngStream rng(seed, 0);
    std::vector<std::vector<double>> groups;
    for (auto n : sizes) {
        std::vector<double> g(n);
        for (auto& v : g) v = rng.normal();
        groups.push_back(std::move(g));
    }
    return GroupedSample(std::move(groups));
}

constexpr EstimatorKind kinds[] = {EstimatorKind::Kernel, EstimatorKind::Bootstrap, EstimatorKind::IntervalBased};

}  // namespace

TEST(Kernel, ConstantSampleIsSingular)
{
    const GroupedSample g({{2, 2, 2, 2}, {1, 2, 3, 4}});
    try {
        kernel_estimate(g, ProbabilityGrid{0.5});
        FAIL() << "expected SingularDensityError";
    } catch (const SingularDensityError& e) {
        EXPECT_EQ(e.group(), 0u);
        EXPECT_EQ(e.prob(), 0.5);
    }
}

TEST(Kernel, OffDiagonalNumerator)
{
    // With a fixed bandwidth the entries are (n/n_i)(min - p_a p_b)/(f_a f_b); the
    // off-diagonal over diagonal ratio exposes the numerator 0.0625 against 0.1875.
    const auto g = normal_groups({50}, 8);
    const auto est = kernel_estimate(g, ProbabilityGrid{0.25, 0.75}, {BandwidthRule::Fixed, 0.4});
    const auto sorted = sorted_groups(g);
    const auto q = quantile_vector(sorted, ProbabilityGrid{0.25, 0.75});
    const double fa = gaussian_kde(sorted[0], 0.4, q(0, 0)), fb = gaussian_kde(sorted[0], 0.4, q(0, 1));
    EXPECT_NEAR(est(0, 0, 1), 0.0625 / (fa * fb), 1e-12);
    EXPECT_NEAR(est(0, 0, 0), 0.1875 / (fa * fa), 1e-12);
    EXPECT_EQ(est(0, 0, 1), est(0, 1, 0));
}

TEST(Kernel, SilvermanBandwidth)
{
    std::vector<double> x{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    // sd = 3.02765, IQR (ceil rule) = 8 - 3 = 5, 5 / 1.34 = 3.73134
    EXPECT_NEAR(silverman_bandwidth(x), 0.9 * 3.0276503540974917 * std::pow(10.0, -0.2), 1e-12);
    // IQR zero, sd positive: fallback to sd n^(-1/5)
    std::vector<double> tied{0, 1, 1, 1, 1, 1, 1, 1, 1, 5};
    const double mean = 1.3;
    double ss = 0;
    for (double v : tied) ss += (v - mean) * (v - mean);
    EXPECT_NEAR(silverman_bandwidth(tied), std::sqrt(ss / 9.0) * std::pow(10.0, -0.2), 1e-12);
    EXPECT_EQ(silverman_bandwidth(std::vector<double>{3, 3, 3}), 0.0);
}

TEST(Kernel, FixedBandwidthMustBePositive)
{
    const auto g = normal_groups({10}, 1);
    EXPECT_THROW(kernel_estimate(g, ProbabilityGrid{0.5}, {BandwidthRule::Fixed, 0.0}), DomainError);
}

TEST(Bootstrap, WeightExample)
{
    const auto w = bootstrap_weights(4, 0.5);
    EXPECT_NEAR(w[0], 1.0 - binomial_cdf(4, 0.25, 1), 1e-15);
    EXPECT_NEAR(w[0], 0.26171875, 1e-15);
}

TEST(Bootstrap, WeightsSumToOne)
{
    for (std::size_t n = 2; n <= 50; ++n)
        for (double p : {0.1, 0.25, 0.5, 0.75, 0.9}) {
            double s = 0.0;
            for (double w : bootstrap_weights(n, p)) {
                EXPECT_GE(w, -1e-15);
                s += w;
            }
            EXPECT_NEAR(s, 1.0, 1e-12) << n << ' ' << p;
        }
}

TEST(Bootstrap, MatchesDirectFormula)
{
    const GroupedSample g({{0.3, -1.0, 2.2, 0.7, 1.1}, {4.0, 3.0, 1.0, 2.0, 5.0, 0.0, 9.0}});
    const ProbabilityGrid grid{0.25, 0.5};
    const auto est = bootstrap_estimate(g, grid);
    const double n = 12.0;
    for (std::size_t i = 0; i < 2; ++i) {
        auto x = g.data()[i];
        std::sort(x.begin(), x.end());
        const double ni = static_cast<double>(x.size());
        std::vector<double> sig;
        for (double p : grid) {
            const double q = x[static_cast<std::size_t>(std::ceil(ni * p)) - 1];
            const auto t = static_cast<std::int64_t>(std::ceil(ni * p)) - 1;
            double acc = 0;
            for (std::size_t j = 1; j <= x.size(); ++j) {
                const double pj = binomial_cdf(x.size(), (j - 1) / ni, t) - binomial_cdf(x.size(), j / ni, t);
                acc += (x[j - 1] - q) * (x[j - 1] - q) * pj;
            }
            sig.push_back(std::sqrt(ni * acc));
        }
        for (std::size_t a = 0; a < 2; ++a)
            for (std::size_t b = 0; b < 2; ++b) {
                const double pa = grid[a], pb = grid[b];
                const double expected = n / ni * sig[a] * sig[b] * (std::min(pa, pb) - pa * pb) /
                                        std::sqrt((pa - pa * pa) * (pb - pb * pb));
                EXPECT_NEAR(est(i, a, b), expected, 1e-12);
            }
    }
}

TEST(Bootstrap, ConstantSampleHasZeroSpread)
{
    const GroupedSample g({{4, 4, 4, 4}, {1, 2, 3, 4}});
    const auto est = bootstrap_estimate(g, ProbabilityGrid{0.5});
    EXPECT_EQ(est(0, 0, 0), 0.0);
    EXPECT_GT(est(1, 0, 0), 0.0);
    EXPECT_EQ(est.zero_variance_groups, std::vector<std::size_t>{0});
}

TEST(Interval, BoundsExample)
{
    const auto iv = interval_bounds(15, 0.5, 0.05);
    EXPECT_EQ(iv.lower, 3u);
    EXPECT_EQ(iv.upper, 11u);
    double covered = 0.0;
    for (int j = 4; j <= 10; ++j) covered += binomial_pmf(15, 0.5, j);
    EXPECT_NEAR(iv.alpha_star, 1.0 - covered, 1e-14);
}

TEST(Interval, TiedSampleHasZeroSpread)
{
    const GroupedSample g({std::vector<double>(15, 1.0), {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15}});
    const auto est = interval_estimate(g, ProbabilityGrid{0.5}, 0.05);
    EXPECT_EQ(est(0, 0, 0), 0.0);
    ASSERT_TRUE(est.alpha_used.has_value());
    EXPECT_EQ(*est.alpha_used, 0.05);
    // Direct formula for group 2: sqrt(15) (X_11 - X_3) / (2 z + 2 / sqrt(15)), scaled by n / n_i = 2.
    const auto iv = interval_bounds(15, 0.5, 0.05);
    const double s = std::sqrt(15.0) * 8.0 / (2.0 * normal_quantile(1.0 - iv.alpha_star / 2.0) + 2.0 / std::sqrt(15.0));
    EXPECT_NEAR(est(1, 0, 0), 2.0 * s * s, 1e-12);
}

TEST(Interval, DegenerateIntervalForTinyGroups)
{
    const GroupedSample g({{1, 2, 3}, {1, 2, 3}});
    try {
        interval_estimate(g, ProbabilityGrid{0.1}, 0.05);
        FAIL() << "expected DegenerateIntervalError";
    } catch (const DegenerateIntervalError& e) {
        EXPECT_EQ(e.group(), 0u);
    }
}

TEST(Estimators, ConsistentForNormalMedian)
{
    // Averaged over independent samples.
    const int samples = 20;
    double sum[3] = {0, 0, 0};
    for (int s = 0; s < samples; ++s) {
        const auto g = normal_groups({10000}, 500 + s);
        for (std::size_t k = 0; k < 3; ++k) sum[k] += estimate_covariance(kinds[k], g, ProbabilityGrid{0.5})(0, 0, 0);
    }
    for (std::size_t k = 0; k < 3; ++k)
        EXPECT_NEAR(sum[k] / samples, std::numbers::pi / 2.0, 0.1 * std::numbers::pi / 2.0) << to_string(kinds[k]);
}

TEST(Estimators, AgreeInOrderOfMagnitude)
{
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto g = normal_groups({1000}, seed);
        const double k = kernel_estimate(g, ProbabilityGrid{0.5})(0, 0, 0);
        const double b = bootstrap_estimate(g, ProbabilityGrid{0.5})(0, 0, 0);
        const double i = interval_estimate(g, ProbabilityGrid{0.5}, 0.05)(0, 0, 0);
        for (double r : {k / b, k / i, b / i}) {
            EXPECT_GT(r, 1.0 / 3.0);
            EXPECT_LT(r, 3.0);
        }
    }
}

TEST(Estimators, ScaleEquivariance)
{
    const auto g = normal_groups({20, 30, 25}, 12);
    std::vector<std::vector<double>> scaled = g.data();
    for (auto& grp : scaled)
        for (auto& v : grp) v *= 3.5;
    const GroupedSample gs(scaled);
    const ProbabilityGrid grid{0.25, 0.5, 0.75};
    for (auto kind : kinds) {
        const auto a = estimate_covariance(kind, g, grid), b = estimate_covariance(kind, gs, grid);
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t x = 0; x < 3; ++x)
                for (std::size_t y = 0; y < 3; ++y)
                    EXPECT_NEAR(b(i, x, y), 3.5 * 3.5 * a(i, x, y), 1e-9 * std::abs(b(i, x, y)) + 1e-12) << to_string(kind);
    }
}

TEST(Estimators, BlocksSymmetricNonnegativeDiagonalAndBlockDiagonal)
{
    RngStream rng(21, 0);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<std::size_t> sizes;
        for (int i = 0; i < 3; ++i) sizes.push_back(15 + rng.uniform_index(20));
        const auto g = normal_groups(sizes, 100 + trial);
        for (auto kind : kinds) {
            const auto est = estimate_covariance(kind, g, ProbabilityGrid{0.25, 0.5, 0.75});
            const auto dense = est.dense();
            EXPECT_LT((dense - dense.transpose()).cwiseAbs().maxCoeff(), 1e-12);
            for (Eigen::Index d = 0; d < dense.rows(); ++d) EXPECT_GE(dense(d, d), 0.0);
            for (Eigen::Index r = 0; r < dense.rows(); ++r)
                for (Eigen::Index c = 0; c < dense.cols(); ++c)
                    if (r / 3 != c / 3) EXPECT_EQ(dense(r, c), 0.0);
        }
    }
}

TEST(Estimators, QuadraticFormMatchesDense)
{
    const auto g = normal_groups({12, 17}, 3);
    const auto est = bootstrap_estimate(g, ProbabilityGrid{0.25, 0.75});
    const std::vector<double> h{0.5, -1.0, 2.0, 0.25};
    Eigen::Map<const Eigen::VectorXd> hv(h.data(), 4);
    EXPECT_NEAR(est.quadratic_form(h), hv.dot(est.dense() * hv), 1e-12);
}

TEST(Estimators, ParseNames)
{
    for (auto kind : kinds) EXPECT_EQ(parse_estimator(to_string(kind)), kind);
    EXPECT_THROW(parse_estimator("jackknife"), ConfigError);
}
