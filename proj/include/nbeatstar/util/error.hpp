#pragma once

#include <stdexcept>
#include <string>

namespace nbeatstar {

/// Base for all recoverable library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (CSV rows, series invariants).
class DataError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration values; the CLI maps these to exit code 2.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Numerical failure during training or evaluation (non-finite values).
class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace nbeatstar
