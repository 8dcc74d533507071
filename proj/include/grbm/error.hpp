#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace grbm {

// Error hierarchy. The CLI maps each family onto an exit code:
// ConfigError -> 2, DomainError (precondition/stability) -> 1,
// NumericError/BlowUpError -> 3.

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed configuration, dimension mismatch, unknown keys.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Non-finite or otherwise unusable input values.
class InputError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

/// A mathematical precondition of an operation does not hold.
class DomainError : public Error {
public:
    using Error::Error;
};

class PreconditionError : public DomainError {
public:
    using DomainError::DomainError;
};

/// A stability hypothesis (mu < 0, nu < 0, ...) is violated.
class StabilityError : public PreconditionError {
public:
    using PreconditionError::PreconditionError;
};

class NumericError : public Error {
public:
    using Error::Error;
};

/// Raised when a simulated state leaves the finite range.
class BlowUpError : public NumericError {
public:
    BlowUpError(std::uint64_t path, std::uint64_t step, const std::string& what)
        : NumericError(what + " (path " + std::to_string(path) + ", step " + std::to_string(step) + ")"),
          path_(path), step_(step) {}

    std::uint64_t path() const noexcept { return path_; }
    std::uint64_t step() const noexcept { return step_; }

private:
    std::uint64_t path_;
    std::uint64_t step_;
};

}  // namespace grbm
