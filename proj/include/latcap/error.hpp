#pragma once

#include <stdexcept>
#include <string>

namespace latcap {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Mismatched lengths or shapes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Argument outside the domain of a function (e.g. N < n, J out of range).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Malformed input file; line is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line, int column = 0)
      : Error(what), line_(line), column_(column) {}
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

// Non-finite intermediate while evaluating the model.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, int stratum = -1)
      : Error(what), stratum_(stratum) {}
  int stratum() const { return stratum_; }

 private:
  int stratum_;
};

// An observed cell has zero model probability.
class BoundaryError : public Error {
 public:
  using Error::Error;
};

// Iterative solver did not meet its tolerance.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace latcap
