#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mnet {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke a documented precondition (shape mismatch, bad index, ...).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// A configuration cannot be realized (non-integer latent size, bad preset, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::size_t epoch)
      : Error(what), epoch_(epoch) {}
  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

/// File missing, truncated, or carrying the wrong magic.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Spherical split of an all-zero CSI matrix.
class ZeroChannelError : public Error {
 public:
  using Error::Error;
};

#define MNET_REQUIRE(cond, msg)                     \
  do {                                              \
    if (!(cond)) throw ::mnet::ContractViolation(msg); \
  } while (0)

}  // namespace mnet
