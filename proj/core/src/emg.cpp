#include "mywear/emg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mywear/error.hpp"

namespace mywear::emg {

SampleSeries emg_envelope(const SampleSeries& raw, const EnvelopeConfig& cfg) {
  if (!is_emg(raw.channel())) {
    throw Error(Errc::WrongChannel, "envelope needs an EMG channel, got " + std::string(to_string(raw.channel())));
  }
  const auto x = raw.values();
  const std::size_t n = x.size();
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);

  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = std::abs(x[i] - mean);
    prefix[i + 1] = prefix[i] + r * r;
  }
  const auto width = static_cast<std::size_t>(std::max<long long>(1, std::llround(cfg.rms_window_ms * raw.rate_hz() / 1000.0)));
  const std::size_t half = width / 2;
  std::vector<double> env(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n, i + (width - half));
    env[i] = std::sqrt(std::max(0.0, (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo)));
  }
  return make_sample_series(raw.channel(), raw.rate_hz(), raw.t0_ms(), std::move(env));
}

RestBaseline estimate_rest_baseline(const SampleSeries& envelope, double rest_ms) {
  const auto v = envelope.values();
  const auto count = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(rest_ms * envelope.rate_hz() / 1000.0)), 1, v.size());
  const double mean = std::accumulate(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(count), 0.0) /
                      static_cast<double>(count);
  double ss = 0.0;
  for (std::size_t i = 0; i < count; ++i) ss += (v[i] - mean) * (v[i] - mean);
  return {mean, std::sqrt(ss / static_cast<double>(count))};
}

std::vector<ActivityPeak> detect_activity_peaks(const SampleSeries& envelope, const RestBaseline& baseline,
                                                const PeakConfig& cfg) {
  const auto v = envelope.values();
  const double threshold = baseline.mean + cfg.k_sigma * baseline.sigma;
  const double sep_ms = cfg.min_separation_ms;

  std::vector<ActivityPeak> peaks;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!(v[i] > threshold)) continue;
    const bool left_ok = i == 0 || v[i] > v[i - 1];
    // Plateaus report their first sample.
    const bool right_ok = i + 1 == v.size() || v[i] >= v[i + 1];
    if (!left_ok || !right_ok) continue;
    ActivityPeak p{envelope.time_of(i), i, v[i]};
    if (!peaks.empty() && static_cast<double>(p.t_ms - peaks.back().t_ms) < sep_ms) {
      if (p.amplitude > peaks.back().amplitude) peaks.back() = p;
      continue;
    }
    peaks.push_back(p);
  }
  return peaks;
}

std::string_view to_string(Intensity level) noexcept {
  switch (level) {
    case Intensity::Rest: return "Rest";
    case Intensity::Light: return "Light";
    case Intensity::Moderate: return "Moderate";
    case Intensity::High: return "High";
  }
  return "Unknown";
}

Intensity grade_intensity(const std::vector<ActivityPeak>& peaks, double calibration_max, const IntensityBins& bins) {
  if (!(calibration_max > 0.0)) {
    throw Error(Errc::NonPositiveCalibration, "calibration maximum must be positive");
  }
  double top = 0.0;
  for (const auto& p : peaks) top = std::max(top, p.amplitude);
  const double ratio = top / calibration_max;
  if (ratio < bins.light) return Intensity::Rest;
  if (ratio < bins.moderate) return Intensity::Light;
  if (ratio < bins.high) return Intensity::Moderate;
  return Intensity::High;
}

MuscleActivity analyze_muscle(const SampleSeries& raw, const ActivityConfig& cfg) {
  auto env = emg_envelope(raw, cfg.envelope);
  const auto base = estimate_rest_baseline(env, cfg.rest_ms);
  auto peaks = detect_activity_peaks(env, base, cfg.peaks);
  const auto level = grade_intensity(peaks, cfg.calibration_max, cfg.bins);
  return {raw.channel(), std::move(env), base, std::move(peaks), level};
}

}  // namespace mywear::emg
