#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ivcr {

/// Input that fails validation (CSV content, option values, dataset invariants).
class DataError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A CSV cell or row failed validation; `row` is the 1-based data row (header excluded).
class CsvRowError : public DataError {
 public:
  CsvRowError(std::size_t row, const std::string& what)
      : DataError("row " + std::to_string(row) + ": " + what), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

/// A linear system could not be solved at the given event time.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, double time)
      : std::runtime_error(what), time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

/// The IV denominator sum_i Gc_i R_i exp(a X_i) X_i vanished: weak or invalid instrument.
class SingularDenominator : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Normal equations of the interaction model are rank deficient.
class SingularNormalEquations : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// The at-risk design of the additive-hazards fit is rank deficient.
class RankDeficientDesign : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptySubgroup : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace ivcr
