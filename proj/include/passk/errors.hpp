#pragma once

#include <stdexcept>
#include <string>

namespace passk {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Trajectory or parameter vector does not fit the policy shape.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Trajectory space larger than the enumeration cap.
class CapacityError : public Error {
 public:
  using Error::Error;
};

// Mode sets overlap or do not cover the verifier's correct set.
class PartitionError : public Error {
 public:
  using Error::Error;
};

// Argument outside its mathematical domain (probability not in [0,1], k < 1, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Mass-ascent update requested on a mode with zero probability.
class DegenerateModeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// A numerical oracle disagreed with the analytic result.
class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace passk
