#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "mywear/motion.hpp"
#include "mywear/signal.hpp"

/// Parametric signal generators. They stand in for recorded garment data and
/// for the beat corpus when the real one is not available.
namespace mywear::synth {

struct EcgConfig {
  double rate_hz = 250.0;
  double duration_s = 60.0;
  double mean_rr_ms = 800.0;
  double rr_jitter_ms = 0.0;   // Gaussian beat-to-beat jitter
  double amplitude_mv = 1.2;
  double noise_mv = 0.0;
  std::int64_t t0_ms = 0;
  std::uint64_t seed = 1;
  /// Class of beat k; beats beyond the list are normal.
  std::vector<BeatClass> beat_classes;
};

struct SyntheticEcg {
  SampleSeries series;
  std::vector<std::size_t> r_peaks;   // true R-peak sample indices
  std::vector<BeatClass> classes;     // one per R peak
};

/// Sum-of-Gaussians P-QRS-T model per beat, one morphology per beat class.
SyntheticEcg ecg(const EcgConfig& cfg);

/// One beat window in corpus format: starts at the R peak, spans
/// 1.2 * RR at 125 Hz (capped at 187), min-max normalised, zero padded.
BeatSegment beat(BeatClass cls, std::mt19937_64& rng);

/// Class shares of the preprocessed MIT-BIH training split (N, S, V, F, Q).
inline constexpr double kMitbihClassShare[kBeatClassCount] = {0.8277, 0.0254, 0.0661, 0.0073, 0.0735};

/// `count` labelled beats with the given class shares (defaults to the
/// MIT-BIH proportions). Deterministic per seed.
std::vector<BeatSegment> beat_corpus(std::size_t count, std::uint64_t seed,
                                     const double (&shares)[kBeatClassCount] = kMitbihClassShare);

enum class FallTraceKind { Rest, Fall, SlowDip, ShallowDip, ImpactOnly };

/// One fall-prediction window of `samples` resultant-acceleration samples at
/// `rate_hz` (default 50 x 50 Hz = 1 s).
std::vector<motion::GSample> fall_trace(FallTraceKind kind, std::mt19937_64& rng,
                                        std::size_t samples = motion::kFallWindow, double rate_hz = 50.0,
                                        std::int64_t t0_ms = 0);

/// Random mix of trace kinds (roughly half falls).
std::vector<std::vector<motion::GSample>> fall_corpus(std::size_t count, std::uint64_t seed);

struct EmgBurst {
  double start_s = 0.0;
  double duration_s = 0.5;
  double amplitude_mv = 0.5;
};

struct EmgConfig {
  Channel channel = Channel::EmgBicep;
  double rate_hz = 1000.0;
  double duration_s = 10.0;
  double rest_noise_mv = 0.01;
  std::vector<EmgBurst> bursts;
  std::int64_t t0_ms = 0;
  std::uint64_t seed = 1;
};

/// Rest noise plus Hann-windowed noise bursts.
SampleSeries emg(const EmgConfig& cfg);

struct ImuConfig {
  double rate_hz = 50.0;
  double duration_s = 10.0;
  double noise_g = 0.005;
  /// Start times (s) of falls inserted into the trace.
  std::vector<double> falls_at_s;
  /// Forward bend (degrees of pitch) held from bend_at_s to the end, if set.
  std::optional<double> bend_at_s;
  double bend_pitch_deg = 35.0;
  std::int64_t t0_ms = 0;
  std::uint64_t seed = 1;
};

std::vector<ImuSample> imu(const ImuConfig& cfg);

}  // namespace mywear::synth
