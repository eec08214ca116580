#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace convat {

/// Shape disagreement between operands. Carries both shapes in the message.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Conv window longer than the sequence it slides over.
class SequenceTooShortError : public DimensionError {
 public:
  SequenceTooShortError(std::size_t length, std::size_t window)
      : DimensionError("sequence length " + std::to_string(length) +
                       " shorter than conv window " + std::to_string(window)),
        length_(length),
        window_(window) {}

  std::size_t length() const noexcept { return length_; }
  std::size_t window() const noexcept { return window_; }

 private:
  std::size_t length_;
  std::size_t window_;
};

class InvalidInputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Non-finite value surfaced during a numeric computation.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Cached activations used against parameters they were not computed from.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Data-file problems (parse, label, format). Maps to the data-error exit code.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& what)
      : DataError(path + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class LabelError : public DataError {
 public:
  using DataError::DataError;
};

class FormatError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace convat
