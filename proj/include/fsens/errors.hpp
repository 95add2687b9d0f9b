#pragma once

#include <stdexcept>
#include <string>

namespace fsens {

// Invalid user input or configuration (CLI exit code 2).
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

// Malformed or degenerate data (CLI exit code 3).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Optimizer divergence or other numerical breakdown (CLI exit code 4).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace fsens
