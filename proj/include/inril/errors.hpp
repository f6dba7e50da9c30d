#pragma once

#include <stdexcept>
#include <string>

namespace inril {

/// Process exit codes used by the CLI. Every library error maps onto one.
enum class ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kValidation = 2,
    kDivergence = 3,
    kTheoryFailure = 4,
};

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual ExitCode exit_code() const noexcept { return ExitCode::kUsage; }
};

/// Misuse of an API: stepping a terminal env, empty batch, missing trace fields.
class UsageError : public Error {
public:
    using Error::Error;
};

/// Missing or unreadable files.
class FileError : public Error {
public:
    using Error::Error;
};

/// Input vectors whose lengths disagree with a network or env.
class ShapeError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::kValidation; }
};

/// Bad configuration values, unknown config keys, head mismatches.
class ConfigError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::kValidation; }
};

/// Malformed demo/checkpoint/log files.
class ParseError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::kValidation; }
};

/// NaN/Inf encountered where finite values are required.
class NumericError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::kDivergence; }
};

class DivergenceError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::kDivergence; }
};

class BudgetExceededError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::kDivergence; }
};

/// Environment cannot produce what was asked (e.g. demos keep failing).
class EnvError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::kValidation; }
};

/// Regularization benefit exceeds the total RL gap; the efficiency ratio is undefined.
class DomainError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::kValidation; }
};

}  // namespace inril
