#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace spectralprior {

/// Base class for every error raised by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or operator shape disagreement. `dimension` names the offending axis.
class ShapeError : public Error {
 public:
  ShapeError(const std::string& what, std::string dimension)
      : Error(what + " [dimension: " + dimension + "]"), dimension_(std::move(dimension)) {}

  const std::string& dimension() const noexcept { return dimension_; }

 private:
  std::string dimension_;
};

/// Invalid configuration or precondition on a parameter.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Loss became non-finite or diverged during optimization.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// File-level failure. `offset` is the byte offset of a malformed field, or npos.
class IoError : public Error {
 public:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  explicit IoError(const std::string& what, std::size_t offset = npos)
      : Error(offset == npos ? what : what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace spectralprior
