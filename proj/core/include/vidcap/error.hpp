#pragma once

#include <stdexcept>
#include <string>

namespace vidcap {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration or request (CLI exit code 1).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed or missing input data (CLI exit code 2).
class DataError : public Error {
public:
    using Error::Error;
};

/// Non-finite values or other numeric breakdowns (CLI exit code 3).
class NumericError : public Error {
public:
    using Error::Error;
};

} // namespace vidcap
