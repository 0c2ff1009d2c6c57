#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qmct/contrasts.hpp"
#include "qmct/covariance.hpp"
#include "qmct/errors.hpp"
#include "qmct/quantile.hpp"
#include "qmct/rng.hpp"

namespace qmct {

/// Correlation matrix of the limiting statistic vector.
struct CorrelationModel
{
    Eigen::MatrixXd matrix;
    /// Eigenvalues below this are treated as zero.
    double eigen_floor = 0.0;

    std::size_t size() const noexcept { return static_cast<std::size_t>(matrix.rows()); }
};

/// R = D H Sigma H' D with D = diag((h_l' Sigma h_l)^{-1/2}).
inline CorrelationModel correlation_model(const ContrastMatrix& h, const CovarianceEstimate& cov)
{
    const Eigen::MatrixXd sigma = cov.dense();
    if (static_cast<std::size_t>(sigma.rows()) != h.columns())
        throw DomainError("covariance and contrast matrix dimensions disagree");
    const Eigen::MatrixXd s = h.matrix() * sigma * h.matrix().transpose();
    Eigen::VectorXd d(s.rows());
    for (Eigen::Index l = 0; l < s.rows(); ++l) {
        if (!(s(l, l) > 0.0) || !std::isfinite(s(l, l))) throw SingularContrastError(static_cast<std::size_t>(l));
        d(l) = 1.0 / std::sqrt(s(l, l));
    }
    CorrelationModel model{d.asDiagonal() * s * d.asDiagonal()};
    model.matrix = 0.5 * (model.matrix + model.matrix.transpose());
    model.matrix.diagonal().setOnes();
    return model;
}

/// Loading matrix L with L L' = R after clipping tiny negative eigenvalues.
/// Works for rank-deficient R, where a Cholesky factorisation would fail.
inline Eigen::MatrixXd spectral_factor(const CorrelationModel& model)
{
    const auto& r = model.matrix;
    if (r.rows() < 1 || r.rows() != r.cols()) throw DomainError("correlation matrix must be square and nonempty");
    if ((r - r.transpose()).cwiseAbs().maxCoeff() > 1e-8) throw DomainError("correlation matrix is not symmetric");
    if (!(model.eigen_floor >= 0.0)) throw DomainError("eigen_floor must be nonnegative");

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(r);
    if (solver.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
    Eigen::VectorXd lambda = solver.eigenvalues();
    // Eigenvalues within round-off of zero are dropped.
    const double noise = 1e-12 * std::max(1.0, lambda.maxCoeff());
    for (Eigen::Index i = 0; i < lambda.size(); ++i) {
        if (lambda(i) < -1e-8) throw DomainError("correlation matrix has a negative eigenvalue " + std::to_string(lambda(i)));
        if (lambda(i) < model.eigen_floor || lambda(i) <= noise) lambda(i) = 0.0;
    }
    std::vector<Eigen::Index> kept;
    for (Eigen::Index i = 0; i < lambda.size(); ++i)
        if (lambda(i) > 0.0) kept.push_back(i);
    Eigen::MatrixXd l(r.rows(), static_cast<Eigen::Index>(kept.size()));
    for (std::size_t c = 0; c < kept.size(); ++c)
        l.col(static_cast<Eigen::Index>(c)) = solver.eigenvectors().col(kept[c]) * std::sqrt(lambda(kept[c]));
    return l;
}

/// Monte Carlo law of max_l Y_l and max_l |Y_l| for Y ~ N(0, R). Both laws
/// come from the same draws, so quantiles at different levels (and the
/// one-sided versus absolute versions) are mutually consistent.
class MaxGaussianLaw
{
public:
    MaxGaussianLaw(const CorrelationModel& model, std::size_t mc_samples, RngStream rng)
    {
        if (mc_samples < 10000) throw DomainError("max_gaussian: at least 10^4 Monte Carlo samples are required");
        const Eigen::MatrixXd l = spectral_factor(model);
        const auto r = static_cast<std::size_t>(l.rows());
        const auto rank = static_cast<std::size_t>(l.cols());
        std::vector<double> loading(r * rank);
        for (std::size_t a = 0; a < r; ++a)
            for (std::size_t b = 0; b < rank; ++b) loading[a * rank + b] = l(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));

        max_.resize(mc_samples);
        abs_max_.resize(mc_samples);
        std::vector<double> z(rank);
        for (std::size_t s = 0; s < mc_samples; ++s) {
            for (auto& v : z) v = rng.normal();
            double top = -std::numeric_limits<double>::infinity(), top_abs = 0.0;
            for (std::size_t a = 0; a < r; ++a) {
                double y = 0.0;
                for (std::size_t b = 0; b < rank; ++b) y += loading[a * rank + b] * z[b];
                top = std::max(top, y);
                top_abs = std::max(top_abs, std::abs(y));
            }
            max_[s] = top;
            abs_max_[s] = top_abs;
        }
        std::sort(max_.begin(), max_.end());
        std::sort(abs_max_.begin(), abs_max_.end());
    }

    /// Empirical level-quantile (ceil order-statistic rule).
    double quantile(double level, bool absolute) const
    {
        if (!(level > 0.0 && level < 1.0)) throw DomainError("quantile level must lie in (0, 1)");
        return sorted_quantile(absolute ? abs_max_ : max_, level);
    }

    /// Fraction of draws at or above t.
    double tail(double t, bool absolute) const
    {
        const auto& v = absolute ? abs_max_ : max_;
        const auto it = std::lower_bound(v.begin(), v.end(), t);
        return static_cast<double>(v.end() - it) / static_cast<double>(v.size());
    }

    std::size_t samples() const noexcept { return max_.size(); }

private:
    std::vector<double> max_;
    std::vector<double> abs_max_;
};

/// level-quantile of max_l Y_l (or max_l |Y_l|), Y ~ N(0, R).
inline double max_gaussian_quantile(const CorrelationModel& model, double level, bool absolute, std::size_t mc_samples,
                                    RngStream rng)
{
    if (!(level > 0.0 && level < 1.0)) throw DomainError("quantile level must lie in (0, 1)");
    return MaxGaussianLaw(model, mc_samples, rng).quantile(level, absolute);
}

}  // namespace qmct
