#pragma once

#include <stdexcept>
#include <string>

namespace metaqda {

enum class ErrorKind {
  NotPositiveDefinite,
  DimensionMismatch,
  NonPositiveDof,
  EmptyInput,
  EmptySupport,
  DuplicateClass,
  LabelOutOfRange,
  InsufficientClasses,
  InsufficientSamplesPerClass,
  BadMagic,
  UnsupportedVersion,
  TruncatedFile,
  TrailingData,
  NonFiniteValue,
  BadCheckpoint,
  Io,
};

const char* to_string(ErrorKind kind) noexcept;

/// Every failure raised by the library carries a machine-checkable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace metaqda
