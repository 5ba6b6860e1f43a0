#pragma once

#include <stdexcept>
#include <string>

namespace trapnet {

enum class Errc {
  DisconnectedGraph,
  NonpositiveConductance,
  SelfLoop,
  UnknownVertex,
  EmptySet,
  OverlappingClasses,
  EmptyClass,
  PairNotDistinct,
  CarrierMismatch,
  NotACorrespondence,
  InvalidScale,
  InvalidTruncation,
  SupportMismatch,
  NumericalFailure,
  NonpositiveTime,
  PreconditionViolated,
  LevelTooLarge,
  InvalidBounds,
  TooLargeForEnumeration,
  InvalidWindow,
  NoCommonEmbedding,
  InvalidConfig,
  ParseError,
};

inline const char* to_string(Errc code) noexcept {
  switch (code) {
    case Errc::DisconnectedGraph: return "DisconnectedGraph";
    case Errc::NonpositiveConductance: return "NonpositiveConductance";
    case Errc::SelfLoop: return "SelfLoop";
    case Errc::UnknownVertex: return "UnknownVertex";
    case Errc::EmptySet: return "EmptySet";
    case Errc::OverlappingClasses: return "OverlappingClasses";
    case Errc::EmptyClass: return "EmptyClass";
    case Errc::PairNotDistinct: return "PairNotDistinct";
    case Errc::CarrierMismatch: return "CarrierMismatch";
    case Errc::NotACorrespondence: return "NotACorrespondence";
    case Errc::InvalidScale: return "InvalidScale";
    case Errc::InvalidTruncation: return "InvalidTruncation";
    case Errc::SupportMismatch: return "SupportMismatch";
    case Errc::NumericalFailure: return "NumericalFailure";
    case Errc::NonpositiveTime: return "NonpositiveTime";
    case Errc::PreconditionViolated: return "PreconditionViolated";
    case Errc::LevelTooLarge: return "LevelTooLarge";
    case Errc::InvalidBounds: return "InvalidBounds";
    case Errc::TooLargeForEnumeration: return "TooLargeForEnumeration";
    case Errc::InvalidWindow: return "InvalidWindow";
    case Errc::NoCommonEmbedding: return "NoCommonEmbedding";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::ParseError: return "ParseError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& detail) { throw Error(code, detail); }

}  // namespace trapnet
