#pragma once

#include <stdexcept>
#include <string>

namespace varest {

// Error taxonomy. Each category maps onto one CLI exit code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual int exit_code() const noexcept { return 1; }
};

// Invalid configuration, bad arguments, invalid spec.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Precondition violated by the caller (e.g. too few samples).
class UsageError : public Error {
public:
    using Error::Error;
};

// Inputs that do not match the expected schema or value range.
class InputError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
};

// Malformed files.
class ParseError : public InputError {
public:
    using InputError::InputError;
};

// Non-finite loss, undefined numeric result.
class TrainingError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

class NumericError : public TrainingError {
public:
    using TrainingError::TrainingError;
};

}  // namespace varest
