#pragma once

#include <stdexcept>
#include <string>

namespace connlearn {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Data does not conform to the declared shape (region counts, label sets).
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// A text cell could not be read as a number.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t row, std::size_t column)
      : Error(what), row_(row), column_(column) {}
  std::size_t row() const { return row_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t row_;
  std::size_t column_;
};

/// Invalid hyperparameters or arguments.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Caller broke a documented precondition (shape mismatch and the like).
class ContractError : public Error {
 public:
  using Error::Error;
};

class LookupError : public Error {
 public:
  using Error::Error;
};

/// A metric is not defined for the given input (e.g. AUC with one class).
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

class NonFiniteGradientError : public Error {
 public:
  explicit NonFiniteGradientError(const std::string& param)
      : Error("non-finite gradient in parameter '" + param + "'"), param_(param) {}
  const std::string& param() const { return param_; }

 private:
  std::string param_;
};

}  // namespace connlearn
