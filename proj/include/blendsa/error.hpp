#ifndef BLENDSA_ERROR_HPP
#define BLENDSA_ERROR_HPP

#include <stdexcept>
#include <string>

namespace blendsa {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input: CSV syntax, schema violations, bad config values.
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& msg) : Error(msg) {}
};

// Numerical failure: singular designs, non-convergence, separation,
// degenerate weights.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& msg) : Error(msg) {}
};

class SingularDesignError : public NumericalError {
 public:
  explicit SingularDesignError(const std::string& msg) : NumericalError(msg) {}
};

class SeparationError : public NumericalError {
 public:
  explicit SeparationError(const std::string& msg) : NumericalError(msg) {}
};

class ConvergenceError : public NumericalError {
 public:
  explicit ConvergenceError(const std::string& msg) : NumericalError(msg) {}
};

// Read of a value whose mask is false outside an imputation writer.
class MissingValueError : public NumericalError {
 public:
  explicit MissingValueError(const std::string& msg) : NumericalError(msg) {}
};

}  // namespace blendsa

#endif
