#pragma once

#include <stdexcept>
#include <string>

namespace trapscore {

// Base of every error thrown by the library. The CLI maps configuration and
// input problems (Config, Input, Schema, Parse, Validation, Referential) to
// exit code 2 and everything else to exit code 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad user-supplied configuration (flags, config file, WorldConfig).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Missing or unreadable input file / artifact.
class InputError : public Error {
public:
    using Error::Error;
};

// CSV header does not carry a required column.
class SchemaError : public Error {
public:
    using Error::Error;
};

// A field could not be parsed as the expected type.
class ParseError : public Error {
public:
    using Error::Error;
};

// A row parsed but violates a domain invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

// A pool references a trap that does not exist.
class ReferentialError : public Error {
public:
    using Error::Error;
};

// Argument outside a function's mathematical domain.
class DomainError : public Error {
public:
    using Error::Error;
};

// Covariance matrix could not be factorized.
class ConditioningError : public Error {
public:
    ConditioningError(const std::string& what, double min_eigenvalue)
        : Error(what), min_eigenvalue_(min_eigenvalue) {}
    double min_eigenvalue() const noexcept { return min_eigenvalue_; }

private:
    double min_eigenvalue_;
};

// Logistic fit diverges (complete or quasi-complete separation, one-class data).
class SeparationError : public Error {
public:
    using Error::Error;
};

class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double objective, double gradient_norm)
        : Error(what), objective_(objective), gradient_norm_(gradient_norm) {}
    double objective() const noexcept { return objective_; }
    double gradient_norm() const noexcept { return gradient_norm_; }

private:
    double objective_;
    double gradient_norm_;
};

// Design matrix is rank deficient.
class RankError : public Error {
public:
    using Error::Error;
};

}  // namespace trapscore
