#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sysid {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument or configuration value.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Shape mismatch; the message names the offending operand.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A numeric kernel produced a non-finite value.
class NumericError : public Error {
 public:
  NumericError(const std::string& msg, std::size_t time_index)
      : Error(msg), time_index_(time_index) {}

  /// First time step at which the non-finite value appeared.
  std::size_t time_index() const noexcept { return time_index_; }

 private:
  std::size_t time_index_;
};

/// Malformed or unreadable container file.
class IoError : public Error {
 public:
  explicit IoError(const std::string& msg, std::size_t offset = 0)
      : Error(msg), offset_(offset) {}

  /// Byte position at which parsing failed.
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace sysid
