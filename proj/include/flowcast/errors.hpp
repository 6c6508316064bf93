#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace flowcast {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input files, arguments or configuration. The CLI maps these to exit code 2.
class InputError : public Error {
 public:
  using Error::Error;
};

// Numeric or simulation failures at run time. The CLI maps these to exit code 3.
class RuntimeFailure : public Error {
 public:
  using Error::Error;
};

class ParseError : public InputError {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : InputError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Malformed binary input, such as a damaged checkpoint.
class FormatError : public InputError {
 public:
  using InputError::InputError;
};

class OrderError : public InputError {
 public:
  using InputError::InputError;
};

class DuplicationError : public InputError {
 public:
  using InputError::InputError;
};

class UnknownStationError : public InputError {
 public:
  explicit UnknownStationError(const std::string& station)
      : InputError("unknown station '" + station + "'"), station_(station) {}

  const std::string& station() const noexcept { return station_; }

 private:
  std::string station_;
};

class SizeError : public InputError {
 public:
  using InputError::InputError;
};

class DomainError : public InputError {
 public:
  using InputError::InputError;
};

class DegenerateInputError : public InputError {
 public:
  using InputError::InputError;
};

class StructuralError : public InputError {
 public:
  using InputError::InputError;
};

class StateError : public InputError {
 public:
  using InputError::InputError;
};

class NumericError : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

class TrainingError : public RuntimeFailure {
 public:
  TrainingError(std::size_t epoch, const std::string& what)
      : RuntimeFailure("epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}

  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

class FitError : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

class CollisionError : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

}  // namespace flowcast
