#pragma once

#include <limits>
#include <stdexcept>
#include <string>

namespace coatcast {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IngestError : public Error {
public:
    using Error::Error;
};

class SchemaError : public Error {
public:
    using Error::Error;
};

/// Precondition on an argument's domain was violated.
class DomainError : public Error {
public:
    using Error::Error;
};

class FitError : public Error {
public:
    using Error::Error;
};

class StatsError : public Error {
public:
    using Error::Error;
};

class CalibrationError : public Error {
public:
    using Error::Error;
};

class InitError : public Error {
public:
    using Error::Error;
};

class SampleError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Raised when the ground intensity vanishes at an observed event. The
/// log-likelihood is then -inf, which is carried along for callers that
/// want to report it.
class LikelihoodError : public Error {
public:
    explicit LikelihoodError(const std::string& what)
        : Error(what) {}

    [[nodiscard]] double value() const noexcept {
        return -std::numeric_limits<double>::infinity();
    }
};

} // namespace coatcast
