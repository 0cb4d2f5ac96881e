#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mywear {

/// Every failure the library reports. The names are stable and appear
/// verbatim in CLI output and JSON reports.
enum class Errc {
  EmptySignal,
  NonFiniteSample,
  NonPositiveRate,
  OutOfRange,
  WrongChannel,
  SignalTooShort,
  NoPeaksFound,
  NonPositiveInterval,
  TooFewPeaks,
  TooFewIntervals,
  NegativeScore,
  MalformedRow,
  UnknownLabel,
  ShapeMismatch,
  EmptyTrainingSet,
  DivergedLoss,
  EmptyEvalSet,
  NotStill,
  ZeroVector,
  WindowLengthMismatch,
  NonMonotonicTime,
  NonPositiveCalibration,
  RngFailure,
  DuplicateDevice,
  UnknownDevice,
  NonceReuse,
  OversizePayload,
  AuthenticationFailure,
  MalformedFrame,
  ReplayedSequence,
  SinkUnavailable,
  InvalidConfig,
  Io,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail);

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace mywear
