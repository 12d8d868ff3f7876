#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace sbc {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Input errors: malformed files, bad configuration, invalid arguments.
// The CLI maps these to exit code 2.
// ---------------------------------------------------------------------------

class InputError : public Error {
public:
    using Error::Error;
};

/// A data-file problem that can be pinned to a row and column.
class ValidationError : public InputError {
public:
    enum class Kind { missing_column, date_gap, negative_value, duplicate_date, parse, length, other };

    ValidationError(Kind kind, std::string message, std::size_t row = 0, std::string column = {})
        : InputError(std::move(message)), kind_(kind), row_(row), column_(std::move(column)) {}

    Kind kind() const noexcept { return kind_; }
    /// 1-based data row (header excluded); 0 when not row specific.
    std::size_t row() const noexcept { return row_; }
    const std::string& column() const noexcept { return column_; }

private:
    Kind kind_;
    std::size_t row_;
    std::string column_;
};

class ConfigError : public InputError {
public:
    using InputError::InputError;
};

class AlignmentError : public InputError {
public:
    using InputError::InputError;
};

// ---------------------------------------------------------------------------
// Graph errors.
// ---------------------------------------------------------------------------

/// Malformed graph: cycle, self loop, duplicate edge, dangling endpoint.
class StructuralError : public InputError {
public:
    using InputError::InputError;
};

/// Unknown node names or a query the back-door criterion does not license.
class IdentificationError : public Error {
public:
    using Error::Error;
};

/// Conditioning on a zero-probability cell.
class DegenerateSupportError : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Estimation errors. The CLI maps these to exit code 3.
// ---------------------------------------------------------------------------

class EstimationError : public Error {
public:
    using Error::Error;
};

/// Rank-deficient design or penalized system. Carries the aliased column names.
class RankError : public EstimationError {
public:
    RankError(std::string message, std::vector<std::string> aliased = {})
        : EstimationError(std::move(message)), aliased_(std::move(aliased)) {}
    const std::vector<std::string>& aliased() const noexcept { return aliased_; }

private:
    std::vector<std::string> aliased_;
};

class CollinearityError : public EstimationError {
public:
    CollinearityError(std::string message, double r_squared)
        : EstimationError(std::move(message)), r_squared_(r_squared) {}
    double r_squared() const noexcept { return r_squared_; }

private:
    double r_squared_;
};

class SampleSizeError : public EstimationError {
public:
    SampleSizeError(std::string message, std::size_t required)
        : EstimationError(std::move(message)), required_(required) {}
    std::size_t required() const noexcept { return required_; }

private:
    std::size_t required_;
};

class ConvergenceError : public EstimationError {
public:
    using EstimationError::EstimationError;
};

}  // namespace sbc
