#pragma once

#include <stdexcept>
#include <string>

namespace invit {

/// Malformed input files, bad CLI values, inconsistent instance data.
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

/// Shape mismatches, invalid actions, misuse of an API.
class LogicError : public std::logic_error {
 public:
  explicit LogicError(const std::string& what) : std::logic_error(what) {}
};

/// Non-finite values or other numeric breakdowns detected at runtime.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace invit
