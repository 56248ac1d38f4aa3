#pragma once

#include <stdexcept>
#include <string>

namespace stablecub
{

/// Bad arguments or malformed input data (CLI exit code 2).
class InputError : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

/// A cubature formula or one of its building blocks could not be constructed
/// (CLI exit code 3).
class ConstructionError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Gram-Schmidt hit a polynomial whose discrete norm collapsed; the point set
/// is numerically not unisolvent for the requested degree.
class BreakdownError : public ConstructionError
{
public:
    BreakdownError(const std::string& what, int index)
        : ConstructionError(what), index_(index)
    {
    }

    int index() const noexcept { return index_; }

private:
    int index_;
};

class RankDeficientError : public ConstructionError
{
public:
    using ConstructionError::ConstructionError;
};

class InfeasibleError : public ConstructionError
{
public:
    using ConstructionError::ConstructionError;
};

class IterationLimitError : public ConstructionError
{
public:
    using ConstructionError::ConstructionError;
};

} // namespace stablecub
