#pragma once

#include <stdexcept>
#include <string>

namespace lqspec {

// Base of every library error. `is_config_error()` separates bad input
// (CLI exit code 2) from numeric failure (exit code 3).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual bool is_config_error() const { return false; }
};

class InvalidParams : public Error {
 public:
  using Error::Error;
  bool is_config_error() const override { return true; }
};

class ChainBroken : public Error {
 public:
  using Error::Error;
  bool is_config_error() const override { return true; }
};

class InvalidGrid : public Error {
 public:
  using Error::Error;
  bool is_config_error() const override { return true; }
};

class InsufficientScales : public Error {
 public:
  using Error::Error;
  bool is_config_error() const override { return true; }
};

class DomainViolation : public Error {
 public:
  using Error::Error;
};

class NoConvergence : public Error {
 public:
  using Error::Error;
};

class DegenerateClass : public Error {
 public:
  using Error::Error;
};

class NoBracket : public Error {
 public:
  using Error::Error;
};

class SingularHalpha : public Error {
 public:
  using Error::Error;
};

}  // namespace lqspec
