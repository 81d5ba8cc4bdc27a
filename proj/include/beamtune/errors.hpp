#pragma once

#include <stdexcept>
#include <string>

namespace beamtune {

/// A numeric argument is outside its domain (non-finite, non-positive, ...).
class InvalidParameter : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A configuration, trial or weights file is malformed or inconsistent.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace beamtune
