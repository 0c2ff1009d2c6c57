#pragma once

#include <stdexcept>
#include <string>

namespace qmct {

/// Base of every error raised by the library.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Invalid argument: violated precondition, bad dimensions, out-of-range probability.
class DomainError : public Error
{
public:
    using Error::Error;
};

/// Malformed configuration (CLI flags, config files).
class ConfigError : public Error
{
public:
    using Error::Error;
};

/// Unusable input data (CSV contents, group structure).
class DataError : public Error
{
public:
    using Error::Error;
};

/// A numerical procedure could not produce a valid result.
class NumericalError : public Error
{
public:
    using Error::Error;
};

class SingularDensityError : public NumericalError
{
public:
    SingularDensityError(std::size_t group, double prob)
        : NumericalError("kernel density estimate is zero for group " + std::to_string(group + 1) +
                         " at probability " + std::to_string(prob)),
          group_(group), prob_(prob)
    {
    }
    std::size_t group() const noexcept { return group_; }
    double prob() const noexcept { return prob_; }

private:
    std::size_t group_;
    double prob_;
};

class DegenerateIntervalError : public NumericalError
{
public:
    DegenerateIntervalError(std::size_t group, double prob)
        : NumericalError("order-statistic interval collapses for group " + std::to_string(group + 1) +
                         " at probability " + std::to_string(prob)),
          group_(group), prob_(prob)
    {
    }
    std::size_t group() const noexcept { return group_; }
    double prob() const noexcept { return prob_; }

private:
    std::size_t group_;
    double prob_;
};

class SingularContrastError : public NumericalError
{
public:
    explicit SingularContrastError(std::size_t row)
        : NumericalError("contrast " + std::to_string(row + 1) + " has nonpositive estimated variance"),
          row_(row)
    {
    }
    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

}  // namespace qmct
