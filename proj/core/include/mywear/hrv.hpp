#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "mywear/signal.hpp"

namespace mywear::hrv {

/// Tuning of the QRS detector. Defaults follow the classic Pan-Tompkins
/// chain; all lengths are in milliseconds so the detector is rate-agnostic.
struct DetectorConfig {
  double highpass_window_ms = 200.0;   // moving-average baseline removed (~5 Hz high-pass)
  double lowpass_window_ms = 33.0;     // moving-average smoother (~15 Hz low-pass)
  double integration_window_ms = 150.0;
  double refractory_ms = 200.0;
  double threshold_fraction = 0.5;     // of the running signal-peak estimate
  double peak_estimate_gain = 0.125;   // running estimate update weight
  double search_half_width_ms = 100.0; // R-peak refinement around the integrator peak
  double min_duration_ms = 2000.0;
};

/// Sample indices of detected R peaks; strictly increasing, spaced at least
/// refractory_ms apart. Throws WrongChannel, SignalTooShort, NoPeaksFound.
std::vector<std::size_t> detect_r_peaks(const SampleSeries& ecg, const DetectorConfig& cfg = {});

/// 60000 / rr_interval_ms. Throws NonPositiveInterval.
double heart_rate_bpm(double rr_interval_ms);

/// Throws TooFewPeaks for fewer than two peaks.
RrSeries rr_series(std::span<const std::size_t> peaks, double rate_hz);

struct HrvTimeDomain {
  double mean_rr_ms = 0.0;
  double sdnn_ms = 0.0;
  double rmssd_ms = 0.0;
  double mean_hr_bpm = 0.0;
  double std_hr_bpm = 0.0;
  double min_hr_bpm = 0.0;
  double max_hr_bpm = 0.0;
  std::size_t nnxx_count = 0;
  double pnnxx_pct = 0.0;
  double xx_ms = 50.0;
};

/// Time-domain metrics over the unflagged intervals. SDNN divides by n,
/// RMSSD by n-1, pNNxx = 100 * NNxx / (n-1). Throws TooFewIntervals.
HrvTimeDomain time_domain_metrics(const RrSeries& rr, double xx_ms = 50.0);

struct PoincareMetrics {
  double sd1_ms = 0.0;
  double sd2_ms = 0.0;
  std::vector<std::pair<double, double>> points;
};

/// Lag-1 return map of the unflagged intervals. SD1/SD2 are population
/// standard deviations along the -45/+45 degree axes. Throws TooFewIntervals.
PoincareMetrics poincare(const RrSeries& rr);

enum class StressLevel { VeryLow, Low, Moderate, Average, High };

std::string_view to_string(StressLevel level) noexcept;

struct StressReport {
  double hrv_score = 0.0;
  StressLevel level = StressLevel::High;
};

/// Bands an RMSSD-based HRV score:
///   [0,60) High, [60,71) Average, [71,81) Moderate, [81,90) Low, [90,inf) VeryLow.
/// Throws NegativeScore (also for NaN).
StressReport stress_level(double hrv_score_ms);

}  // namespace mywear::hrv
