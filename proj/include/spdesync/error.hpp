#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace spdesync {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid parameters or configuration values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Two fields live on different grids.
class IoError : public Error {
 public:
  using Error::Error;
};

class GridMismatch : public Error {
 public:
  using Error::Error;
};

/// A documented precondition of an operation does not hold.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// The discrete trajectory left the finite range; carries the step index.
class BlowUpError : public Error {
 public:
  BlowUpError(std::int64_t step, const std::string& what)
      : Error(what), step_(step) {}
  std::int64_t step() const noexcept { return step_; }

 private:
  std::int64_t step_;
};

/// Least-squares fit without variance in the data.
class DegenerateFit : public Error {
 public:
  using Error::Error;
};

}  // namespace spdesync
