#pragma once

#include <stdexcept>
#include <string>

namespace unigest {

// Invalid configuration: network shape arithmetic, bad option values.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed or inconsistent data on disk: annotations, checkpoints, images.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Bad arguments to an operation: shape mismatch, empty input.
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

// Failures during optimization: divergence, non-finite gradients.
class TrainError : public std::runtime_error {
 public:
  explicit TrainError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace unigest
