#include "mfld/error.hpp"

namespace mfld {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Io: return "Io";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::Truncated: return "Truncated";
    case ErrorCode::ManifestMismatch: return "ManifestMismatch";
    case ErrorCode::InvalidStore: return "InvalidStore";
    case ErrorCode::UnknownKey: return "UnknownKey";
    case ErrorCode::UnknownLayer: return "UnknownLayer";
    case ErrorCode::TooFewManifolds: return "TooFewManifolds";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NotBracketable: return "NotBracketable";
    case ErrorCode::NoRecords: return "NoRecords";
    case ErrorCode::Numerical: return "Numerical";
  }
  return "Unknown";
}

}  // namespace mfld
