#include <cmath>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "qmct/distributions.hpp"
#include "qmct/inference.hpp"
#include "qmct/oracles.hpp"

using namespace qmct;

TEST(Bisection, ContinuousAndStepCdfs)
{
    EXPECT_NEAR(oracles::cdf_inverse_bisect(oracles::normal_cdf_series, 0.975, -10, 10), 1.959964, 1e-6);
    const StudyDistribution chisq(DistributionKind::ChiSq3);
    EXPECT_NEAR(oracles::cdf_inverse_bisect([&](double x) { return chisq.cdf(x); }, 0.5, 0, 30), 2.36597, 1e-5);
    // Right-continuous step cdf with jumps at 1, 2, 3: the quantile is the jump point.
    const auto step = [](double x) { return x < 1 ? 0.0 : x < 2 ? 0.25 : x < 3 ? 0.75 : 1.0; };
    EXPECT_NEAR(oracles::cdf_inverse_bisect(step, 0.25, 0, 4), 1.0, 1e-9);
    EXPECT_NEAR(oracles::cdf_inverse_bisect(step, 0.5, 0, 4), 2.0, 1e-9);
    EXPECT_NEAR(oracles::cdf_inverse_bisect(step, 0.75, 0, 4), 2.0, 1e-9);
    EXPECT_NEAR(oracles::cdf_inverse_bisect(step, 0.76, 0, 4), 3.0, 1e-9);
    EXPECT_THROW(oracles::cdf_inverse_bisect(step, 0.5, 2.5, 4), DomainError);
}

TEST(IndependentMax, ClosedForms)
{
    EXPECT_NEAR(oracles::independent_max_quantile(1, 0.95, false), 1.644854, 1e-6);
    EXPECT_NEAR(oracles::independent_max_quantile(1, 0.95, true), 1.959964, 1e-6);
    EXPECT_NEAR(oracles::independent_max_quantile(2, 0.95, true), 2.2365, 1e-4);
}

TEST(Enumeration, CountsAssignments)
{
    const GroupedSample g({{0.3, -1.2, 2.1}, {0.8, 1.7, -0.4}});
    const HypothesisFamily f(dunnett(2), {0.0}, Direction::TwoSided, ProbabilityGrid{0.5});
    const auto law = oracles::enumerate_permutation_law(g, f, EstimatorKind::Bootstrap);
    EXPECT_EQ(law.assignments, 20u);
    EXPECT_EQ(law.statistics.size() + law.failed, 20u);
    const GroupedSample three({{1, 2}, {3, 4}, {5, 6}});
    const HypothesisFamily f3(dunnett(3), {0.0}, Direction::TwoSided, ProbabilityGrid{0.5});
    EXPECT_EQ(oracles::enumerate_permutation_law(three, f3, EstimatorKind::Bootstrap).assignments, 90u);
    std::vector<std::vector<double>> big(2, std::vector<double>(7, 1.0));
    big[1][0] = 2.0;
    EXPECT_THROW(oracles::enumerate_permutation_law(GroupedSample(big), f, EstimatorKind::Bootstrap), DomainError);
}

TEST(Enumeration, DegenerateDataGivesZeroLaw)
{
    const GroupedSample g({{2, 2, 2}, {2, 2, 2}});
    const HypothesisFamily f(dunnett(2), {0.0}, Direction::TwoSided, ProbabilityGrid{0.5});
    const auto law = oracles::enumerate_permutation_law(g, f, EstimatorKind::Bootstrap);
    for (const auto& t : law.statistics) EXPECT_EQ(t[0], 0.0);
    EXPECT_EQ(oracles::enumerate_permutation_quantile(g, f, EstimatorKind::Bootstrap, 0.9)[0], 0.0);
}

TEST(Enumeration, AgreesWithMonteCarloWithinAtomSpacing)
{
    const GroupedSample g({{0.3, -1.2, 2.1, 0.05}, {0.8, 1.7, -0.4, 1.1}});
    const HypothesisFamily f(dunnett(2), {0.0}, Direction::TwoSided, ProbabilityGrid{0.5});
    const auto law = oracles::enumerate_permutation_law(g, f, EstimatorKind::Bootstrap);
    const auto exact = law.sorted_column(0, true);
    auto mc = permutation_law(g, f, EstimatorKind::Bootstrap, 20000, RngStream(3, 0)).column(0, true);
    std::sort(mc.begin(), mc.end());
    for (double beta : {0.5, 0.8, 0.9}) {
        const double e = oracles::enumerate_permutation_quantile(g, f, EstimatorKind::Bootstrap, beta)[0];
        const double m = sorted_quantile(mc, beta);
        EXPECT_LE(std::abs(e - m), oracles::atom_spacing(exact, e) + 1e-12) << beta;
    }
}

TEST(Enumeration, MonteCarloLawCloseInKolmogorovDistance)
{
    // Symmetric data: the permutation law has many small atoms.
    const GroupedSample g({{-1.5, -0.2, 0.4, 1.3, 0.9, -0.7}, {0.1, -1.1, 1.6, -0.4, 0.6, 2.0}});
    const HypothesisFamily f(dunnett(2), {0.0}, Direction::TwoSided, ProbabilityGrid{0.5});
    const auto law = oracles::enumerate_permutation_law(g, f, EstimatorKind::Bootstrap);
    const auto exact = law.sorted_column(0, false);
    const auto mc = permutation_law(g, f, EstimatorKind::Bootstrap, 50000, RngStream(4, 0)).column(0, false);
    EXPECT_LE(oracles::ks_distance(exact, mc), 0.02);
}

TEST(Helpers, KsAndAtomSpacing)
{
    EXPECT_EQ(oracles::ks_distance({1, 2, 3}, {1, 2, 3}), 0.0);
    EXPECT_NEAR(oracles::ks_distance({0, 0}, {1, 1}), 1.0, 1e-15);
    EXPECT_NEAR(oracles::atom_spacing({0, 1, 1, 3}, 1), 2.0, 1e-15);
    EXPECT_NEAR(oracles::atom_spacing({0, 1, 1, 3}, 0), 1.0, 1e-15);
}

TEST(Selftest, AllChecksPass)
{
    std::ostringstream out;
    EXPECT_TRUE(oracles::run_selftest(out)) << out.str();
    EXPECT_EQ(out.str().find("FAIL"), std::string::npos);
}
