#pragma once

#include <stdexcept>
#include <string>

namespace dirnormal {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class NonFiniteError : public Error {
 public:
  using Error::Error;
};

class NotPositiveDefinite : public Error {
 public:
  using Error::Error;
};

class NoConvergence : public Error {
 public:
  using Error::Error;
};

// The observed statistic sits exactly at its null expectation (W == 0):
// gamma, t_sup and the directional line are undefined.
class DegenerateNull : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class InvalidScenario : public Error {
 public:
  using Error::Error;
};

}  // namespace dirnormal
