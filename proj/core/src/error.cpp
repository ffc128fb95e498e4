#include "metaqda/error.hpp"

namespace metaqda {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NonPositiveDof: return "NonPositiveDof";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::EmptySupport: return "EmptySupport";
    case ErrorKind::DuplicateClass: return "DuplicateClass";
    case ErrorKind::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorKind::InsufficientClasses: return "InsufficientClasses";
    case ErrorKind::InsufficientSamplesPerClass: return "InsufficientSamplesPerClass";
    case ErrorKind::BadMagic: return "BadMagic";
    case ErrorKind::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorKind::TruncatedFile: return "TruncatedFile";
    case ErrorKind::TrailingData: return "TrailingData";
    case ErrorKind::NonFiniteValue: return "NonFiniteValue";
    case ErrorKind::BadCheckpoint: return "BadCheckpoint";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace metaqda
