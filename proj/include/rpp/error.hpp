// Copyright 2026 The rpp Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace rpp {

enum class ErrorKind {
  kInvalidArgument,
  kUsage,
  kIo,
  kParse,
  kValidation,
  kEnvironment,
  kRuntime,
};

/// Base exception for every failure raised by the library. The kind selects
/// the status code surfaced through the C API.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error invalid_argument(const std::string& what) {
  return Error(ErrorKind::kInvalidArgument, what);
}
inline Error usage_error(const std::string& what) {
  return Error(ErrorKind::kUsage, what);
}
inline Error io_error(const std::string& what) {
  return Error(ErrorKind::kIo, what);
}
inline Error parse_error(const std::string& what) {
  return Error(ErrorKind::kParse, what);
}
inline Error validation_error(const std::string& what) {
  return Error(ErrorKind::kValidation, what);
}
inline Error environment_error(const std::string& what) {
  return Error(ErrorKind::kEnvironment, what);
}
inline Error runtime_error(const std::string& what) {
  return Error(ErrorKind::kRuntime, what);
}

}  // namespace rpp
