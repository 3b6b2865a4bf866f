#pragma once

#include <stdexcept>
#include <string>

namespace tba {

// Invalid configuration or argument. The message names the offending field.
class ParameterError : public std::invalid_argument {
 public:
  explicit ParameterError(const std::string& what) : std::invalid_argument(what) {}
};

// Malformed input data (non-finite costs, inconsistent assignments, ...).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Operation called on an object in the wrong state.
class StateError : public std::logic_error {
 public:
  explicit StateError(const std::string& what) : std::logic_error(what) {}
};

}  // namespace tba
