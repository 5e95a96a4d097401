#pragma once

#include <stdexcept>
#include <string>

namespace memshare {

// Invalid configuration, bad dimensions, unparseable input. CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite loss/gradient or other runtime fault during training. Exit code 3.
class TrainingFault : public std::runtime_error {
 public:
  explicit TrainingFault(const std::string& what) : std::runtime_error(what) {}
};

// Checkpoint does not match the requested task/architecture. Exit code 4.
class IncompatibilityError : public std::runtime_error {
 public:
  explicit IncompatibilityError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace memshare
