/**
 * @file errors.hpp
 *
 * @brief Exception types shared by all mrcmt modules.
 *
 * Validation problems (bad geometry, bad config values, mismatched inputs)
 * throw ValidationError. Everything that goes wrong inside a numerical
 * kernel (range, overflow, non-convergence, ill-conditioning) throws a
 * NumericalError subclass, so callers such as the CLI can map the two
 * families onto distinct exit codes.
 */

#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace mrcmt {

/// Invalid input: geometry, configuration or precondition violation.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Base class of all failures raised by numerical kernels.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Order or argument outside the supported evaluation range.
class RangeError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Result not representable as a finite double.
class OverflowError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Iterative method failed; carries a human readable trace of the search.
class ConvergenceError : public NumericalError {
public:
    ConvergenceError(const std::string& what, std::vector<std::string> trace = {})
        : NumericalError(what), trace_(std::move(trace)) {}

    const std::vector<std::string>& trace() const noexcept { return trace_; }

private:
    std::vector<std::string> trace_;
};

/// Linear system too ill-conditioned to be trusted.
class ConditioningError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Fewer modes exist than were requested.
class InsufficientModesError : public NumericalError {
public:
    InsufficientModesError(const std::string& what, int found)
        : NumericalError(what), found_(found) {}

    int found() const noexcept { return found_; }

private:
    int found_;
};

}  // namespace mrcmt
