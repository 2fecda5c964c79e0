#pragma once

#include <stdexcept>
#include <string>

namespace cdckws {

enum class ErrorCode {
  EmptyKeyword,
  DegenerateKeyword,
  BlankInKeyword,
  DimensionMismatch,
  LengthMismatch,
  InvalidConfig,
  NoNegativeData,
  EmptyBucket,
  InstanceTooLarge,
  SpanTooLong,
  BadMagic,
  BadVersion,
  TruncatedFile,
  UnknownWord,
  UnknownPhone,
  DuplicateId,
  ParseError,
  IoError,
};

const char* to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI in particular) can map it to an exit status.
class KwsError : public std::runtime_error {
 public:
  KwsError(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace cdckws
