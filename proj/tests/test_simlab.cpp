#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "qmct/simlab.hpp"
#include "qmct/study.hpp"

using namespace qmct;

namespace {

Scenario small_scenario(Direction dir = Direction::TwoSided, double margin = 0.0)
{
    Scenario s;
    s.distribution = StudyDistribution(DistributionKind::StdNormal);
    s.sigmas = {1, 1, 1};
    s.sample_sizes = {10, 10, 10};
    s.mus = {0, 0, 0};
    s.family = HypothesisFamily(dunnett(3), {margin}, dir, ProbabilityGrid{0.5});
    s.method = Method::BonferroniAsymptotic;
    s.cov_kind = EstimatorKind::Kernel;
    s.resamples = 100;
    s.mc_samples = 10000;
    s.n_sim = 60;
    s.seed = 5;
    return s;
}

}  // namespace

TEST(Generate, DeterministicInSeedCellAndReplicate)
{
    const auto s = small_scenario();
    EXPECT_EQ(generate(s, 3).data(), generate(s, 3).data());
    EXPECT_NE(generate(s, 3).data(), generate(s, 4).data());
    auto other = s;
    other.cell_id = 1;
    EXPECT_NE(generate(s, 3).data(), generate(other, 3).data());
    other = s;
    other.seed = 6;
    EXPECT_NE(generate(s, 3).data(), generate(other, 3).data());
}

TEST(Generate, LocationScaleModel)
{
    auto s = small_scenario();
    s.distribution = StudyDistribution(DistributionKind::ChiSq3);
    s.sample_sizes = {20000, 20000, 20000};
    s.sigmas = {1, 2, 0.5};
    s.mus = {0, 0, 3};
    const auto g = generate(s, 0);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_NEAR(empirical_quantile(g.data()[i], 0.5), s.mus[i], 0.05 * s.sigmas[i]) << i;
        const double iqr = empirical_quantile(g.data()[i], 0.75) - empirical_quantile(g.data()[i], 0.25);
        const double pop = population_quantile(s, i, 0.75) - population_quantile(s, i, 0.25);
        EXPECT_NEAR(iqr, pop, 0.05 * pop) << i;
    }
    EXPECT_NEAR(population_quantile(s, 2, 0.5), 3.0, 1e-12);
}

TEST(Generate, ScaleOnlyChangesSpread)
{
    auto s = small_scenario();
    auto t = s;
    t.sigmas = {2, 2, 2};
    const auto a = generate(s, 7), b = generate(t, 7);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < a.data()[i].size(); ++j) EXPECT_NEAR(b.data()[i][j], 2.0 * a.data()[i][j], 1e-12);
}

TEST(TruthOracle, Examples)
{
    auto s = small_scenario();
    EXPECT_EQ(truth_oracle(s), (std::vector<bool>{true, true}));
    s.mus = {0, 0, 1};
    EXPECT_EQ(truth_oracle(s), (std::vector<bool>{true, false}));

    // Different scales keep the medians equal but not the IQRs.
    auto t = small_scenario();
    t.sigmas = {1, 1.5, 1};
    t.family = HypothesisFamily(kron_with_effect(dunnett(3), median_iqr_effect()), {0.0}, Direction::TwoSided,
                                ProbabilityGrid{0.25, 0.5, 0.75});
    EXPECT_EQ(truth_oracle(t), (std::vector<bool>{true, false, true, true}));

    // Non-inferiority with margin: q_3 - q_1 <= 1 holds at shift 1, fails at shift 1.5.
    auto n = small_scenario(Direction::NonInferiority, 1.0);
    n.mus = {0, 0, 1};
    EXPECT_EQ(truth_oracle(n), (std::vector<bool>{true, true}));
    n.mus = {0, 0, 1.5};
    EXPECT_EQ(truth_oracle(n), (std::vector<bool>{true, false}));

    auto e = small_scenario(Direction::Equivalence, 0.5);
    e.mus = {0, 0.2, 0.7};
    EXPECT_EQ(truth_oracle(e), (std::vector<bool>{false, true}));

    auto bad = small_scenario();
    bad.family = HypothesisFamily(kron_with_effect(dunnett(3), Eigen::MatrixXd::Identity(2, 2)), {0.0},
                                  Direction::TwoSided, ProbabilityGrid{0.1, 0.9});
    EXPECT_THROW(truth_oracle(bad), DomainError);
}

TEST(Scenario, Validation)
{
    auto s = small_scenario();
    s.sigmas = {1, 1};
    EXPECT_THROW(s.validate(), DomainError);
    s = small_scenario();
    s.sample_sizes = {10, 1, 10};
    EXPECT_THROW(s.validate(), DomainError);
    s = small_scenario();
    s.sigmas = {1, 0, 1};
    EXPECT_THROW(s.validate(), DomainError);
    s = small_scenario();
    s.n_sim = 0;
    EXPECT_THROW(s.validate(), DomainError);
}

TEST(RunCells, IndependentOfThreadCount)
{
    auto s = small_scenario();
    s.mus = {0, 0, 0.8};
    const auto one = run_cells(s, all_methods, 1);
    const auto four = run_cells(s, all_methods, 4);
    ASSERT_EQ(one.size(), 4u);
    for (std::size_t m = 0; m < 4; ++m) {
        EXPECT_EQ(one[m].local_counts, four[m].local_counts);
        EXPECT_EQ(one[m].fwer_count, four[m].fwer_count);
        EXPECT_EQ(one[m].global_count, four[m].global_count);
        EXPECT_EQ(one[m].failed, four[m].failed);
    }
}

TEST(RunCells, CountsAreCoherent)
{
    auto s = small_scenario();
    s.mus = {0, 0, 1.0};
    for (const auto& r : run_cells(s, all_methods, 1)) {
        EXPECT_EQ(r.n_effective + r.failed, s.n_sim);
        EXPECT_FALSE(r.global_null_true);
        EXPECT_EQ(r.fwer_or_power_global, r.global_rate);
        EXPECT_LE(r.fwer_count, r.local_counts[0]);
        EXPECT_LE(r.global_count, r.local_counts[0] + r.local_counts[1]);
        EXPECT_GE(r.global_count, std::max(r.local_counts[0], r.local_counts[1]));
        EXPECT_DOUBLE_EQ(r.local_rates[1], static_cast<double>(r.local_counts[1]) / r.n_effective);
        EXPECT_GT(r.local_rates[1], r.local_rates[0]);
    }
}

TEST(RunCells, PowerEqualsFwerUnderGlobalNull)
{
    const auto s = small_scenario();
    for (const auto& r : run_cells(s, all_methods, 1)) {
        EXPECT_TRUE(r.global_null_true);
        EXPECT_EQ(r.fwer, r.global_rate);
        EXPECT_EQ(r.fwer_or_power_global, r.fwer);
    }
}

TEST(RunCells, SingleMethodMatchesSharedRun)
{
    auto s = small_scenario();
    s.method = Method::BootstrapMCTP;
    const auto one = run_cell(s, 1);
    const auto all = run_cells(s, all_methods, 1);
    EXPECT_EQ(one.local_counts, all[1].local_counts);
}

TEST(RunCells, EquivalenceScenarios)
{
    auto s = small_scenario(Direction::Equivalence, 3.0);
    s.sample_sizes = {30, 30, 30};
    s.n_sim = 20;
    const auto r = run_cell(s, 1);
    EXPECT_EQ(r.global_rate, 1.0);
    EXPECT_FALSE(r.global_null_true);
}

TEST(Study, ConfigParsingAndExpansion)
{
    const auto j = nlohmann::json::parse(R"({
        "sample_sizes": [[15,15,15,15],[10,10,20,20]],
        "sigmas": [[1,1,1,1]],
        "shifts": [0, 1],
        "directions": ["two-sided", "noninferiority"],
        "methods": ["asymp-bonferroni"],
        "n_sim": 10, "B": 50, "seed": 3
    })");
    const auto c = parse_study_config(j);
    EXPECT_EQ(c.n_sim, 10u);
    EXPECT_EQ(c.resamples, 50u);
    const auto cells = expand_cells(c);
    ASSERT_EQ(cells.size(), 8u);
    for (std::size_t i = 0; i < cells.size(); ++i) EXPECT_EQ(cells[i].id, i);
    // Loop order: sizes, then shifts, then directions.
    EXPECT_EQ(cells[1].direction, DirectionSpec::NonInferiority);
    EXPECT_EQ(cells[2].shift, 1.0);
    EXPECT_EQ(cells[4].sample_sizes, (std::vector<std::size_t>{10, 10, 20, 20}));
    const auto s = make_scenario(c, cells[3]);
    EXPECT_EQ(s.mus, (std::vector<double>{0, 0, 0, 1}));
    EXPECT_EQ(s.cell_id, 3u);
    EXPECT_EQ(s.family.direction(), Direction::NonInferiority);
}

TEST(Study, ConfigErrors)
{
    EXPECT_THROW(parse_study_config(nlohmann::json::parse(R"({"nsim": 3})")), ConfigError);
    EXPECT_THROW(parse_study_config(nlohmann::json::parse(R"({"alpha": 1.5})")), ConfigError);
    EXPECT_THROW(parse_study_config(nlohmann::json::parse(R"({"methods": ["holm"]})")), ConfigError);
    EXPECT_THROW(parse_study_config(nlohmann::json::parse(R"({"distributions": ["cauchy"]})")), ConfigError);
    EXPECT_THROW(parse_study_config(nlohmann::json::parse(R"({"shifts": 1})")), ConfigError);
    EXPECT_THROW(parse_study_config(nlohmann::json::parse(R"({"sigmas": [[1, -1]]})")), ConfigError);
    EXPECT_THROW(parse_study_config(nlohmann::json::parse("[1, 2]")), ConfigError);
}

TEST(Study, EmptyGridProducesNoRows)
{
    const auto c = parse_study_config(nlohmann::json::parse(R"({"shifts": []})"));
    EXPECT_TRUE(expand_cells(c).empty());
    const auto rows = run_study(c, 1);
    EXPECT_TRUE(rows.empty());
    const auto j = study_to_json(c, rows);
    EXPECT_TRUE(j.at("rows").empty());
}

TEST(Study, JsonIsReproducible)
{
    const auto c = parse_study_config(nlohmann::json::parse(
        R"({"sample_sizes": [[8,8,8]], "sigmas": [[1,1,1]], "n_sim": 15, "B": 40, "mc_samples": 10000, "shifts": [0, 2]})"));
    const auto a = study_to_json(c, run_study(c, 1)).dump();
    const auto b = study_to_json(c, run_study(c, 3)).dump();
    EXPECT_EQ(a, b);
    std::ostringstream csv;
    write_study_delimited(csv, c, run_study(c, 1));
    EXPECT_NE(csv.str().find(study_columns), std::string::npos);
}
