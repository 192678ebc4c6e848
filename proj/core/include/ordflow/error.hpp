#pragma once

#include <stdexcept>
#include <string>

namespace ordflow {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inputs whose shapes do not agree (point dimensions, grid widths, ...).
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Preconditions on arguments: boxes outside the grid, bad schedules, bad tags.
class DomainError : public Error {
 public:
  using Error::Error;
};

// A numerical guard tripped: step-size limits, growth bounds, blow-up.
class GuardError : public Error {
 public:
  using Error::Error;
};

// Malformed scenario configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace ordflow
