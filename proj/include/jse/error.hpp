#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace jse {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed arguments, shape mismatches, unreadable files.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// A regularized normal-equation system could not be solved.
class SingularSystem : public Error {
 public:
  SingularSystem(const std::string& what, std::size_t bin)
      : Error(what + " (frequency bin " + std::to_string(bin) + ")"), bin_(bin) {}
  std::size_t bin() const { return bin_; }

 private:
  std::size_t bin_;
};

/// A non-finite value appeared inside a pipeline stage.
class NumericalFailure : public Error {
 public:
  NumericalFailure(std::string stage, const std::string& what)
      : Error("numerical failure in " + stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

}  // namespace jse
