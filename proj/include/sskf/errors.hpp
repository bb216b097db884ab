#pragma once

#include <stdexcept>
#include <string>

namespace sskf {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An argument is outside its documented domain (probabilities, levels, counts).
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Matrix or vector dimensions disagree.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A variable, group or hypothesis index is out of range.
class IndexError : public Error {
public:
    using Error::Error;
};

/// Input values violate a distributional or schema assumption.
class DataError : public Error {
public:
    using Error::Error;
};

/// Fewer observations than an operation needs.
class InsufficientDataError : public DataError {
public:
    using DataError::DataError;
};

/// CSV ingestion failure; the message carries the row and column.
class IngestionError : public DataError {
public:
    IngestionError(const std::string& what, std::size_t row, std::string column)
        : DataError(what + " (row " + std::to_string(row) + ", column '" + column + "')"),
          row_(row), column_(std::move(column)) {}

    std::size_t row() const noexcept { return row_; }
    const std::string& column() const noexcept { return column_; }

private:
    std::size_t row_;
    std::string column_;
};

/// Experiment configuration is malformed or fails validation.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace sskf
