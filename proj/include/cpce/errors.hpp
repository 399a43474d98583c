#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cpce {

/// Point outside the support of an input marginal or model.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Singular or ill-conditioned linear algebra.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A training point with leverage 1; analytic leave-one-out formulas divide by zero.
class DegenerateLeverageError : public NumericalError {
public:
    DegenerateLeverageError(std::size_t index, const std::string& what)
        : NumericalError(what), index_(index) {}
    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

/// Invalid configuration or argument values.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// An interval search could not satisfy its boundary condition.
class BracketError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File could not be read or written; the message carries the path.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace cpce
