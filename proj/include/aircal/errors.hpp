#pragma once

#include <stdexcept>
#include <string>

namespace aircal {

/// Base class for every error thrown by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Bad or inconsistent input data (CSV schema, alignment, shapes, splits).
/// The CLI maps these to exit code 2.
struct DataError : Error {
  using Error::Error;
};

/// Filesystem problem (missing file, unwritable directory). Exit code 3.
struct IoError : Error {
  using Error::Error;
};

/// Training failed to make progress (diverging loss). Exit code 4.
struct TrainError : Error {
  using Error::Error;
};

/// Invalid command-line usage. Exit code 1.
struct UsageError : Error {
  using Error::Error;
};

// Fine-grained data problems, all mapped to exit code 2 by the CLI.

struct SchemaError : DataError {
  using DataError::DataError;
};

struct AlignmentError : DataError {
  using DataError::DataError;
};

struct ShapeError : DataError {
  using DataError::DataError;
};

struct SplitError : DataError {
  using DataError::DataError;
};

struct InsufficientDataError : DataError {
  using DataError::DataError;
};

struct DomainError : DataError {
  using DataError::DataError;
};

/// Statistic undefined on the given input (e.g. zero-variance reference).
struct DegenerateError : DataError {
  using DataError::DataError;
};

/// A cache or artifact does not belong to the object it was used with.
struct IntegrityError : DataError {
  using DataError::DataError;
};

}  // namespace aircal
