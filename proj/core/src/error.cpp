#include "mywear/error.hpp"

namespace mywear {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::EmptySignal: return "EmptySignal";
    case Errc::NonFiniteSample: return "NonFiniteSample";
    case Errc::NonPositiveRate: return "NonPositiveRate";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::WrongChannel: return "WrongChannel";
    case Errc::SignalTooShort: return "SignalTooShort";
    case Errc::NoPeaksFound: return "NoPeaksFound";
    case Errc::NonPositiveInterval: return "NonPositiveInterval";
    case Errc::TooFewPeaks: return "TooFewPeaks";
    case Errc::TooFewIntervals: return "TooFewIntervals";
    case Errc::NegativeScore: return "NegativeScore";
    case Errc::MalformedRow: return "MalformedRow";
    case Errc::UnknownLabel: return "UnknownLabel";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::EmptyTrainingSet: return "EmptyTrainingSet";
    case Errc::DivergedLoss: return "DivergedLoss";
    case Errc::EmptyEvalSet: return "EmptyEvalSet";
    case Errc::NotStill: return "NotStill";
    case Errc::ZeroVector: return "ZeroVector";
    case Errc::WindowLengthMismatch: return "WindowLengthMismatch";
    case Errc::NonMonotonicTime: return "NonMonotonicTime";
    case Errc::NonPositiveCalibration: return "NonPositiveCalibration";
    case Errc::RngFailure: return "RngFailure";
    case Errc::DuplicateDevice: return "DuplicateDevice";
    case Errc::UnknownDevice: return "UnknownDevice";
    case Errc::NonceReuse: return "NonceReuse";
    case Errc::OversizePayload: return "OversizePayload";
    case Errc::AuthenticationFailure: return "AuthenticationFailure";
    case Errc::MalformedFrame: return "MalformedFrame";
    case Errc::ReplayedSequence: return "ReplayedSequence";
    case Errc::SinkUnavailable: return "SinkUnavailable";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& detail)
    : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

}  // namespace mywear
