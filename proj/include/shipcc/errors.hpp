#pragma once

#include <stdexcept>
#include <string>

namespace shipcc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An argument lies outside the domain an operation is defined on.
class InputDomainError : public Error {
public:
    using Error::Error;
};

/// An argument makes a closed-form expression singular (e.g. zero solvent flow).
class SingularInputError : public Error {
public:
    using Error::Error;
};

/// The capture rate is undefined because there is no CO2 in the flue gas.
class UndefinedRateError : public Error {
public:
    using Error::Error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

/// Newton failed to find algebraic states satisfying g(x, z, u, p) = 0.
class InitializationError : public Error {
public:
    InitializationError(const std::string& what, double residual)
        : Error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// An implicit DAE step did not converge or left the physical state range.
class StepFailure : public Error {
public:
    StepFailure(const std::string& what, long index = -1)
        : Error(what), index_(index) {}
    /// Sample index inside a trajectory, or -1 for a standalone step.
    long index() const noexcept { return index_; }

private:
    long index_;
};

class TrainingDivergence : public Error {
public:
    using Error::Error;
};

class SetpointFailure : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace shipcc
