#pragma once

#include <stdexcept>
#include <string>

namespace denssiam {

// Error taxonomy. Each maps to a distinct status code at the C API boundary.

// Caller violated an operation precondition (shape mismatch, bad mode, ...).
class ContractError : public std::runtime_error {
public:
  explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid configuration value (non-positive output size, even label map, ...).
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// NaN/Inf produced where finite values are required.
class NumericError : public std::runtime_error {
public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem / OS failure.
class IoError : public std::runtime_error {
public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed file contents (bad magic, checksum, manifest mismatch, ...).
class FormatError : public std::runtime_error {
public:
  explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace denssiam
