#include "cdckws/error.hpp"

namespace cdckws {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyKeyword: return "EmptyKeyword";
    case ErrorCode::DegenerateKeyword: return "DegenerateKeyword";
    case ErrorCode::BlankInKeyword: return "BlankInKeyword";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::NoNegativeData: return "NoNegativeData";
    case ErrorCode::EmptyBucket: return "EmptyBucket";
    case ErrorCode::InstanceTooLarge: return "InstanceTooLarge";
    case ErrorCode::SpanTooLong: return "SpanTooLong";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::BadVersion: return "BadVersion";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::UnknownWord: return "UnknownWord";
    case ErrorCode::UnknownPhone: return "UnknownPhone";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace cdckws
