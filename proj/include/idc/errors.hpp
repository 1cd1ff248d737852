#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace idc {

enum class Errc {
  DimensionMismatch,
  ZeroNormVector,
  EmptyInput,
  LabelOutOfRange,
  StaleCache,
  ShapeMismatch,
  SingleClass,
  EmptyBank,
  IndexOutOfRange,
  ZeroNormKey,
  ConfigInvalid,
  EmptyTargetSet,
  InvalidSpec,
  FormatError,
  DuplicateId,
  VersionMismatch,
  CorruptFile,
  UsageError,
  IoError,
};

const char* to_string(Errc code);

/// Every failure in the library surfaces as an Error carrying a stable code.
/// `line` is the 1-based line number for file parsing errors and 0 otherwise.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what, std::size_t line = 0)
      : std::runtime_error(what), code_(code), line_(line) {}

  Errc code() const noexcept { return code_; }
  std::size_t line() const noexcept { return line_; }

 private:
  Errc code_;
  std::size_t line_;
};

}  // namespace idc
