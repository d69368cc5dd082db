#pragma once

#include <stdexcept>
#include <string>

namespace flowsense {

// Bad user input: unknown keys, malformed files, invalid command lines.
// The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Violated data contract (shape mismatch, dangling reference, bad schema).
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure at runtime (divergence, non-finite values).
// The CLI maps this to exit code 1.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace flowsense
