#pragma once

#include <stdexcept>
#include <string>

namespace toolife {

/// Base for every error raised by the library. The CLI maps the concrete
/// subclass onto a process exit code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or non-finite input data (stress samples, CSV cells, ...).
class DataError : public Error {
public:
    using Error::Error;
};

/// Argument outside the mathematical domain of a formula.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Caller broke a documented precondition.
class ContractError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class MeshError : public Error {
public:
    using Error::Error;
};

/// Linear solve failed. Carries the pivot ratio of the factorization.
class SolverError : public Error {
public:
    SolverError(const std::string& what, double condition_estimate)
        : Error(what), condition_estimate_(condition_estimate) {}

    double condition_estimate() const { return condition_estimate_; }

private:
    double condition_estimate_;
};

/// NaN/Inf showed up during training.
class NumericalFault : public Error {
public:
    using Error::Error;
};

/// Checkpoint written by an incompatible version or for another config.
class VersionError : public Error {
public:
    using Error::Error;
};

}  // namespace toolife
