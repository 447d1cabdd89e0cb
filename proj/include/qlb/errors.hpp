#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace qlb {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain (non-finite input, p <= 1, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// A documented precondition of an operation does not hold.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// A quantity is singular at the requested point (e.g. calG where g vanishes).
class SingularValueError : public Error {
public:
    using Error::Error;
};

/// A map that must be inverted is not monotone, or the target is unreachable.
class InvertibilityError : public Error {
public:
    using Error::Error;
};

/// Input data (samples, integrand values) violate a required invariant.
class DataError : public Error {
public:
    using Error::Error;
};

/// Internal consistency check failed; indicates a bug rather than a math fact.
class IntegrityError : public Error {
public:
    using Error::Error;
};

/// A required hypothesis failed (e.g. infinite oscillation budget).
class HypothesisError : public Error {
public:
    using Error::Error;
};

/// Iterative method did not reach its tolerance.
class NonConvergenceError : public Error {
public:
    NonConvergenceError(const std::string& what, std::vector<double> history)
        : Error(what), history_(std::move(history)) {}

    const std::vector<double>& history() const noexcept { return history_; }

private:
    std::vector<double> history_;
};

}  // namespace qlb
