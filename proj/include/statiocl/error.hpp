#pragma once

#include <stdexcept>
#include <string>

namespace statiocl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shape or dimension mismatch between operands.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// A caller violated a documented precondition.
class ContractError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration or user input. The CLI maps this to exit code 1.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Input series too short for the requested test.
class LengthError : public Error {
public:
    using Error::Error;
};

/// Input has no variation (e.g. constant series), so the statistic is undefined.
class DegenerateInputError : public Error {
public:
    using Error::Error;
};

/// Rank-deficient least-squares design.
class SingularMatrixError : public Error {
public:
    using Error::Error;
};

/// Malformed or unreadable file (checkpoint, manifest, values).
class LoadError : public Error {
public:
    using Error::Error;
};

}  // namespace statiocl
