#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qmct/contrasts.hpp"
#include "qmct/distributions.hpp"
#include "qmct/errors.hpp"
#include "qmct/inference.hpp"
#include "qmct/parallel.hpp"
#include "qmct/quantile.hpp"
#include "qmct/rng.hpp"

namespace qmct {

/// One simulation setting of the location-scale model
/// X_is = sigma_i (eta_is - m) + mu_i with eta drawn from `distribution`.
struct Scenario
{
    StudyDistribution distribution{};
    std::vector<double> sigmas;
    std::vector<std::size_t> sample_sizes;
    std::vector<double> mus;
    HypothesisFamily family;
    Method method = Method::BonferroniPermutation;
    EstimatorKind cov_kind = EstimatorKind::Kernel;
    double alpha = 0.05;
    std::size_t resamples = 500;
    std::size_t mc_samples = 100000;
    std::size_t n_sim = 1000;
    std::uint64_t seed = 1;
    /// Distinguishes the data streams of different settings under one seed.
    std::uint64_t cell_id = 0;

    void validate() const
    {
        const auto k = sample_sizes.size();
        if (k < 2) throw DomainError("scenario needs at least two groups");
        if (sigmas.size() != k || mus.size() != k) throw DomainError("scenario sigmas, sizes and mus must have equal length");
        for (double s : sigmas)
            if (!(s > 0.0)) throw DomainError("scenario sigmas must be positive");
        for (auto n : sample_sizes)
            if (n < 2) throw DomainError("scenario sample sizes must be at least 2");
        if (family.matrix().groups() != k) throw DomainError("scenario family does not match the number of groups");
        if (n_sim < 1) throw DomainError("n_sim must be at least 1");
    }

    MethodOptions method_options() const
    {
        MethodOptions opt;
        opt.cov_kind = cov_kind;
        opt.estimator.alpha = alpha;
        opt.alpha = alpha;
        opt.resamples = resamples;
        opt.mc_samples = mc_samples;
        return opt;
    }

    RngStream replicate_stream(std::size_t replicate) const { return RngStream(seed, cell_id).derive(replicate); }
};

struct ScenarioResult
{
    Method method = Method::BonferroniPermutation;
    /// All local nulls are true, so global rejections are errors.
    bool global_null_true = true;
    /// FWER under a true global null, global power otherwise.
    double fwer_or_power_global = 0.0;
    double fwer = 0.0;
    double global_rate = 0.0;
    std::vector<double> local_rates;
    std::size_t n_effective = 0;
    std::size_t failed = 0;
    std::size_t fwer_count = 0;
    std::size_t global_count = 0;
    std::vector<std::size_t> local_counts;
    std::chrono::duration<double> wall_time{};
};

/// Draws one replicate; deterministic in (seed, cell_id, replicate).
inline GroupedSample generate(const Scenario& scenario, std::size_t replicate)
{
    scenario.validate();
    RngStream rng = scenario.replicate_stream(replicate).derive(0);
    const double center = scenario.distribution.median();
    std::vector<std::vector<double>> groups(scenario.sample_sizes.size());
    for (std::size_t i = 0; i < groups.size(); ++i) {
        groups[i] = scenario.distribution.sample(rng, scenario.sample_sizes[i]);
        for (auto& x : groups[i]) x = scenario.sigmas[i] * (x - center) + scenario.mus[i];
    }
    return GroupedSample(std::move(groups));
}

/// Population quantile of group i at probability p under the scenario model.
inline double population_quantile(const Scenario& scenario, std::size_t group, double p)
{
    return scenario.sigmas[group] * (scenario.distribution.quantile(p) - scenario.distribution.median()) +
           scenario.mus[group];
}

/// Whether each local null hypothesis holds in the population.
inline std::vector<bool> truth_oracle(const Scenario& scenario)
{
    scenario.validate();
    const auto& probs = scenario.family.grid().probs();
    const bool supported = probs == std::vector<double>{0.5} || probs == std::vector<double>{0.25, 0.5, 0.75};
    if (!supported) throw DomainError("truth oracle supports the grids {0.5} and {0.25, 0.5, 0.75} only");

    const std::size_t k = scenario.sample_sizes.size(), m = probs.size();
    std::vector<double> q(k * m);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < m; ++j) q[i * m + j] = population_quantile(scenario, i, probs[j]);

    const auto& family = scenario.family;
    std::vector<bool> truth(family.rows());
    for (std::size_t l = 0; l < family.rows(); ++l) {
        const auto h = family.matrix().row(l);
        double effect = 0.0, scale = 1.0;
        for (std::size_t c = 0; c < h.size(); ++c) {
            effect += h[c] * q[c];
            scale += std::abs(h[c] * q[c]);
        }
        const double tol = 1e-9 * scale;
        const double eps = family.margins()[l];
        switch (family.direction()) {
        case Direction::TwoSided: truth[l] = std::abs(effect - eps) <= tol; break;
        case Direction::NonInferiority: truth[l] = effect - eps <= tol; break;
        case Direction::Equivalence: truth[l] = std::abs(effect) >= eps - tol; break;
        }
    }
    return truth;
}

/// Runs several methods on the same generated data sets and aggregates
/// FWER, global and local rejection rates per method.
inline std::vector<ScenarioResult> run_cells(const Scenario& scenario, std::span<const Method> methods,
                                             std::size_t parallelism)
{
    const auto start = std::chrono::steady_clock::now();
    scenario.validate();
    const auto truth = truth_oracle(scenario);
    const auto opt = scenario.method_options();
    const std::size_t r = scenario.family.rows();

    struct Outcome
    {
        bool ok = false;
        std::vector<bool> local;
        bool global = false;
    };
    std::vector<std::vector<Outcome>> outcomes(scenario.n_sim, std::vector<Outcome>(methods.size()));

    parallel_for(scenario.n_sim, parallelism, [&](std::size_t rep) {
        const auto data = generate(scenario, rep);
        const RngStream rng = scenario.replicate_stream(rep).derive(1);
        for (std::size_t mi = 0; mi < methods.size(); ++mi) {
            try {
                const auto d = scenario.family.direction() == Direction::Equivalence
                                   ? tost_equivalence(data, scenario.family, methods[mi], opt, rng)
                                   : run_method(methods[mi], data, scenario.family, opt, rng);
                outcomes[rep][mi] = {true, d.local_reject, d.global_reject};
            } catch (const NumericalError&) {
                outcomes[rep][mi] = {};
            }
        }
    });

    const bool global_null = std::all_of(truth.begin(), truth.end(), [](bool t) { return t; });
    std::vector<ScenarioResult> results;
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
        ScenarioResult res;
        res.method = methods[mi];
        res.global_null_true = global_null;
        res.local_counts.assign(r, 0);
        for (std::size_t rep = 0; rep < scenario.n_sim; ++rep) {
            const auto& o = outcomes[rep][mi];
            if (!o.ok) {
                ++res.failed;
                continue;
            }
            ++res.n_effective;
            bool false_rejection = false;
            for (std::size_t l = 0; l < r; ++l) {
                res.local_counts[l] += o.local[l] ? 1 : 0;
                false_rejection = false_rejection || (o.local[l] && truth[l]);
            }
            res.fwer_count += false_rejection ? 1 : 0;
            res.global_count += o.global ? 1 : 0;
        }
        if (res.failed * 20 > scenario.n_sim || res.n_effective == 0)
            throw NumericalError("method " + std::string(to_string(methods[mi])) + " failed in " +
                                 std::to_string(res.failed) + " of " + std::to_string(scenario.n_sim) + " replicates");
        const auto neff = static_cast<double>(res.n_effective);
        res.fwer = static_cast<double>(res.fwer_count) / neff;
        res.global_rate = static_cast<double>(res.global_count) / neff;
        for (auto c : res.local_counts) res.local_rates.push_back(static_cast<double>(c) / neff);
        res.fwer_or_power_global = global_null ? res.fwer : res.global_rate;
        results.push_back(std::move(res));
    }
    const auto elapsed = std::chrono::steady_clock::now() - start;
    for (auto& res : results) res.wall_time = elapsed;
    return results;
}

inline ScenarioResult run_cell(const Scenario& scenario, std::size_t parallelism)
{
    const Method one[] = {scenario.method};
    return run_cells(scenario, one, parallelism).front();
}

}  // namespace qmct
