#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "mywear/signal.hpp"

namespace mywear::emg {

struct EnvelopeConfig {
  double rms_window_ms = 100.0;
};

/// Full-wave rectified, mean-removed signal smoothed by a centred RMS window.
/// Output has the input's rate and start time. Throws WrongChannel.
SampleSeries emg_envelope(const SampleSeries& raw, const EnvelopeConfig& cfg = {});

struct RestBaseline {
  double mean = 0.0;
  double sigma = 0.0;
};

/// Mean and population standard deviation of the envelope over its first
/// rest_ms milliseconds (the whole envelope if shorter).
RestBaseline estimate_rest_baseline(const SampleSeries& envelope, double rest_ms);

struct PeakConfig {
  double k_sigma = 3.0;
  double min_separation_ms = 250.0;
};

struct ActivityPeak {
  std::int64_t t_ms = 0;
  std::size_t index = 0;
  double amplitude = 0.0;
};

/// Local maxima above baseline.mean + k * baseline.sigma. Peaks closer than
/// min_separation_ms are merged, keeping the taller one. Sorted by time.
std::vector<ActivityPeak> detect_activity_peaks(const SampleSeries& envelope, const RestBaseline& baseline,
                                                const PeakConfig& cfg = {});

enum class Intensity { Rest, Light, Moderate, High };
std::string_view to_string(Intensity level) noexcept;

struct IntensityBins {
  double light = 0.1;
  double moderate = 0.4;
  double high = 0.7;
};

/// Bands max peak amplitude / calibration_max. Throws NonPositiveCalibration.
Intensity grade_intensity(const std::vector<ActivityPeak>& peaks, double calibration_max,
                          const IntensityBins& bins = {});

struct MuscleActivity {
  Channel channel = Channel::EmgBicep;
  SampleSeries envelope;
  RestBaseline baseline;
  std::vector<ActivityPeak> peaks;
  Intensity intensity = Intensity::Rest;
};

struct ActivityConfig {
  EnvelopeConfig envelope;
  PeakConfig peaks;
  IntensityBins bins;
  double rest_ms = 1000.0;
  double calibration_max = 1.0;
};

MuscleActivity analyze_muscle(const SampleSeries& raw, const ActivityConfig& cfg = {});

}  // namespace mywear::emg
