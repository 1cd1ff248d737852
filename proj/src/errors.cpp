#include "idc/errors.hpp"

namespace idc {

const char* to_string(Errc code) {
  switch (code) {
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::ZeroNormVector: return "ZeroNormVector";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::LabelOutOfRange: return "LabelOutOfRange";
    case Errc::StaleCache: return "StaleCache";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::SingleClass: return "SingleClass";
    case Errc::EmptyBank: return "EmptyBank";
    case Errc::IndexOutOfRange: return "IndexOutOfRange";
    case Errc::ZeroNormKey: return "ZeroNormKey";
    case Errc::ConfigInvalid: return "ConfigInvalid";
    case Errc::EmptyTargetSet: return "EmptyTargetSet";
    case Errc::InvalidSpec: return "InvalidSpec";
    case Errc::FormatError: return "FormatError";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::VersionMismatch: return "VersionMismatch";
    case Errc::CorruptFile: return "CorruptFile";
    case Errc::UsageError: return "UsageError";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace idc
