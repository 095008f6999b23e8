// Error types shared by all modules. InputError maps to CLI exit code 2,
// NumericError (degenerate selection, singular systems) to exit code 3.
#pragma once

#include <stdexcept>
#include <string>

namespace pb {

class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace pb
