#pragma once

#include <stdexcept>
#include <string>

namespace aware {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Input is well-formed but carries no usable information (zero support,
/// zero variance, empty histogram).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// Structural mismatch: unknown column, mismatched bins.
class SchemaError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// The ledger has no wealth left to fund another test.
class ExhaustionError : public Error {
 public:
  using Error::Error;
};

class MissingInputError : public Error {
 public:
  using Error::Error;
};

/// A wealth update would drive the ledger negative.
class AccountingError : public Error {
 public:
  using Error::Error;
};

class IngestionError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

/// Operation not valid for the current state of a record or session.
class StateError : public Error {
 public:
  using Error::Error;
};

class ReplayError : public Error {
 public:
  using Error::Error;
};

}  // namespace aware
