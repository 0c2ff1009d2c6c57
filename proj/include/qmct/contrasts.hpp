#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qmct/errors.hpp"
#include "qmct/quantile.hpp"

namespace qmct {

enum class FamilyTag { Dunnett, Tukey, GrandMean, Custom, KroneckerComposite };

inline std::string_view to_string(FamilyTag tag)
{
    switch (tag) {
    case FamilyTag::Dunnett: return "dunnett";
    case FamilyTag::Tukey: return "tukey";
    case FamilyTag::GrandMean: return "grandmean";
    case FamilyTag::Custom: return "custom";
    case FamilyTag::KroneckerComposite: return "kronecker";
    }
    return "?";
}

/// r x (k*m) matrix of contrast rows; column i*m + j belongs to group i and
/// probability index j. Every row sums to zero over the groups for each j.
class ContrastMatrix
{
public:
    ContrastMatrix() = default;
    ContrastMatrix(Eigen::MatrixXd rows, std::size_t groups, std::size_t probs, FamilyTag tag = FamilyTag::Custom)
        : rows_(std::move(rows)), groups_(groups), probs_(probs), tag_(tag)
    {
        validate();
    }

    std::size_t rows() const noexcept { return static_cast<std::size_t>(rows_.rows()); }
    std::size_t columns() const noexcept { return static_cast<std::size_t>(rows_.cols()); }
    std::size_t groups() const noexcept { return groups_; }
    std::size_t probs() const noexcept { return probs_; }
    FamilyTag tag() const noexcept { return tag_; }
    const Eigen::MatrixXd& matrix() const noexcept { return rows_; }

    /// Row l as a contiguous vector.
    std::vector<double> row(std::size_t l) const
    {
        std::vector<double> out(columns());
        for (std::size_t c = 0; c < columns(); ++c) out[c] = rows_(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(c));
        return out;
    }

    ContrastMatrix negated() const { return ContrastMatrix(-rows_, groups_, probs_, tag_); }

    void validate() const
    {
        if (rows_.rows() < 1) throw DomainError("contrast matrix needs at least one row");
        if (groups_ < 1 || probs_ < 1 || static_cast<std::size_t>(rows_.cols()) != groups_ * probs_)
            throw DomainError("contrast matrix must have k*m columns");
        for (Eigen::Index l = 0; l < rows_.rows(); ++l) {
            const double scale = rows_.row(l).cwiseAbs().maxCoeff();
            if (scale == 0.0) throw DomainError("contrast row " + std::to_string(l + 1) + " is all zero");
            for (std::size_t j = 0; j < probs_; ++j) {
                double sum = 0.0;
                for (std::size_t i = 0; i < groups_; ++i) sum += rows_(l, static_cast<Eigen::Index>(i * probs_ + j));
                if (std::abs(sum) > 1e-10 * scale)
                    throw DomainError("contrast row " + std::to_string(l + 1) +
                                      " violates the zero-sum property at probability index " + std::to_string(j + 1));
            }
        }
    }

private:
    Eigen::MatrixXd rows_;
    std::size_t groups_ = 0;
    std::size_t probs_ = 0;
    FamilyTag tag_ = FamilyTag::Custom;
};

namespace detail {

inline void require_groups(std::size_t k, const char* name)
{
    if (k < 2) throw DomainError(std::string(name) + ": at least two groups are required");
}

}  // namespace detail

/// Many-to-one: row l compares group l+1 with group 1.
inline ContrastMatrix dunnett(std::size_t k)
{
    detail::require_groups(k, "dunnett");
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k - 1), static_cast<Eigen::Index>(k));
    for (Eigen::Index l = 0; l + 1 < static_cast<Eigen::Index>(k); ++l) {
        h(l, 0) = -1.0;
        h(l, l + 1) = 1.0;
    }
    return {std::move(h), k, 1, FamilyTag::Dunnett};
}

/// All pairs (a < b), ordered by a then b; row reads "group b minus group a".
inline ContrastMatrix tukey(std::size_t k)
{
    detail::require_groups(k, "tukey");
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k * (k - 1) / 2), static_cast<Eigen::Index>(k));
    Eigen::Index l = 0;
    for (Eigen::Index a = 0; a < static_cast<Eigen::Index>(k); ++a)
        for (Eigen::Index b = a + 1; b < static_cast<Eigen::Index>(k); ++b, ++l) {
            h(l, a) = -1.0;
            h(l, b) = 1.0;
        }
    return {std::move(h), k, 1, FamilyTag::Tukey};
}

/// Each group against the unweighted mean of all groups.
inline ContrastMatrix grand_mean(std::size_t k)
{
    detail::require_groups(k, "grand_mean");
    const auto n = static_cast<Eigen::Index>(k);
    Eigen::MatrixXd h = Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(k));
    return {std::move(h), k, 1, FamilyTag::GrandMean};
}

/// Effect matrix selecting the median and the IQR on the grid (0.25, 0.5, 0.75).
inline Eigen::MatrixXd median_iqr_effect()
{
    Eigen::MatrixXd e(2, 3);
    e << 0, 1, 0, -1, 0, 1;
    return e;
}

/// base (k groups, one probability) Kronecker effect (m columns); rows are
/// ordered base-row-major.
inline ContrastMatrix kron_with_effect(const ContrastMatrix& base, const Eigen::MatrixXd& effect)
{
    if (base.probs() != 1) throw DomainError("kron_with_effect: base matrix must be built for a single probability");
    if (effect.rows() < 1 || effect.cols() < 1) throw DomainError("kron_with_effect: empty effect matrix");
    const auto& b = base.matrix();
    const Eigen::Index re = effect.rows(), m = effect.cols();
    Eigen::MatrixXd h(b.rows() * re, b.cols() * m);
    for (Eigen::Index l = 0; l < b.rows(); ++l)
        for (Eigen::Index e = 0; e < re; ++e)
            for (Eigen::Index i = 0; i < b.cols(); ++i)
                for (Eigen::Index j = 0; j < m; ++j) h(l * re + e, i * m + j) = b(l, i) * effect(e, j);
    const auto tag = effect.rows() == 1 && effect.cols() == 1 && effect(0, 0) == 1.0 ? base.tag() : FamilyTag::KroneckerComposite;
    return {std::move(h), base.groups(), static_cast<std::size_t>(m), tag};
}

enum class Direction { TwoSided, NonInferiority, Equivalence };

inline std::string_view to_string(Direction d)
{
    switch (d) {
    case Direction::TwoSided: return "two-sided";
    case Direction::NonInferiority: return "noninferiority";
    case Direction::Equivalence: return "equivalence";
    }
    return "?";
}

/// Contrast matrix, margins, direction and probability grid of one test family.
///
/// TwoSided:       H0_l: h_l'q == eps_l
/// NonInferiority: H0_l: h_l'q <= eps_l
/// Equivalence:    H0_l: |h_l'q| >= delta_l, delta_l > 0
class HypothesisFamily
{
public:
    HypothesisFamily() = default;
    HypothesisFamily(ContrastMatrix matrix, std::vector<double> margins, Direction direction, ProbabilityGrid grid)
        : matrix_(std::move(matrix)), margins_(std::move(margins)), direction_(direction), grid_(std::move(grid))
    {
        if (margins_.size() == 1 && matrix_.rows() > 1) margins_.assign(matrix_.rows(), margins_.front());
        if (margins_.size() != matrix_.rows())
            throw DomainError("expected " + std::to_string(matrix_.rows()) + " margins, got " + std::to_string(margins_.size()));
        if (matrix_.probs() != grid_.size()) throw DomainError("contrast matrix and probability grid disagree on m");
        for (double e : margins_) {
            if (!std::isfinite(e)) throw DomainError("margins must be finite");
            if (direction_ == Direction::Equivalence && !(e > 0.0))
                throw DomainError("equivalence margins must be positive");
        }
    }

    const ContrastMatrix& matrix() const noexcept { return matrix_; }
    const std::vector<double>& margins() const noexcept { return margins_; }
    Direction direction() const noexcept { return direction_; }
    const ProbabilityGrid& grid() const noexcept { return grid_; }
    std::size_t rows() const noexcept { return matrix_.rows(); }

private:
    ContrastMatrix matrix_;
    std::vector<double> margins_;
    Direction direction_ = Direction::TwoSided;
    ProbabilityGrid grid_;
};

}  // namespace qmct
