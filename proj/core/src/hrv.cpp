#include "mywear/hrv.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mywear/error.hpp"

namespace mywear::hrv {
namespace {

std::size_t ms_to_samples(double ms, double rate_hz) {
  return static_cast<std::size_t>(std::max<long long>(1, std::llround(ms * rate_hz / 1000.0)));
}

// Centered moving average; the window shrinks at the edges.
std::vector<double> moving_average(std::span<const double> x, std::size_t width) {
  const std::size_t n = x.size();
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + x[i];
  const std::size_t half = width / 2;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n, i + (width - half));
    out[i] = (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
  }
  return out;
}

std::vector<double> five_point_derivative(std::span<const double> x) {
  const std::size_t n = x.size();
  auto at = [&](std::ptrdiff_t i) {
    i = std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(n) - 1);
    return x[static_cast<std::size_t>(i)];
  };
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto i = static_cast<std::ptrdiff_t>(k);
    out[k] = (-at(i - 2) - 2.0 * at(i - 1) + 2.0 * at(i + 1) + at(i + 2)) / 8.0;
  }
  return out;
}

double population_std(std::span<const double> v, double mean) {
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

std::vector<std::size_t> detect_r_peaks(const SampleSeries& ecg, const DetectorConfig& cfg) {
  if (ecg.channel() != Channel::Ecg) {
    throw Error(Errc::WrongChannel, "R-peak detection needs an ECG series, got " + std::string(to_string(ecg.channel())));
  }
  if (ecg.duration_ms() < cfg.min_duration_ms) {
    throw Error(Errc::SignalTooShort, "ECG of " + std::to_string(ecg.duration_ms()) + " ms is shorter than " +
                                          std::to_string(cfg.min_duration_ms) + " ms");
  }
  const double rate = ecg.rate_hz();
  const auto x = ecg.values();
  const std::size_t n = x.size();

  const auto baseline = moving_average(x, ms_to_samples(cfg.highpass_window_ms, rate));
  std::vector<double> highpassed(n);
  for (std::size_t i = 0; i < n; ++i) highpassed[i] = x[i] - baseline[i];
  const auto bandpassed = moving_average(highpassed, ms_to_samples(cfg.lowpass_window_ms, rate));
  auto energy = five_point_derivative(bandpassed);
  for (double& e : energy) e *= e;
  const auto integrated = moving_average(energy, ms_to_samples(cfg.integration_window_ms, rate));

  const double global_max = *std::max_element(integrated.begin(), integrated.end());
  if (!(global_max > 0.0)) throw Error(Errc::NoPeaksFound, "no QRS energy in signal");
  const double floor = global_max * 1e-9;

  // Local maxima of the integrator output, plateaus reported once.
  std::vector<std::size_t> candidates;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (integrated[i] > integrated[i - 1] && integrated[i] >= integrated[i + 1] && integrated[i] > floor) {
      candidates.push_back(i);
    }
  }

  const std::size_t learn = std::min(n, ms_to_samples(2000.0, rate));
  double signal_peak = *std::max_element(integrated.begin(), integrated.begin() + static_cast<std::ptrdiff_t>(learn));
  const std::size_t refractory = ms_to_samples(cfg.refractory_ms, rate);
  const std::size_t half_search = ms_to_samples(cfg.search_half_width_ms, rate);

  auto refine = [&](std::size_t centre) {
    const std::size_t lo = centre >= half_search ? centre - half_search : 0;
    const std::size_t hi = std::min(n - 1, centre + half_search);
    std::size_t best = lo;
    for (std::size_t i = lo; i <= hi; ++i) {
      if (std::abs(highpassed[i]) > std::abs(highpassed[best])) best = i;
    }
    return best;
  };

  std::vector<std::size_t> peaks;
  std::vector<double> recent_rr;  // in samples
  std::size_t last_candidate_pos = 0;

  auto accept = [&](std::size_t cand) {
    const std::size_t r = refine(cand);
    if (!peaks.empty() && (r <= peaks.back() || r - peaks.back() < refractory)) return false;
    if (!peaks.empty()) {
      recent_rr.push_back(static_cast<double>(r - peaks.back()));
      if (recent_rr.size() > 8) recent_rr.erase(recent_rr.begin());
    }
    peaks.push_back(r);
    signal_peak = cfg.peak_estimate_gain * integrated[cand] + (1.0 - cfg.peak_estimate_gain) * signal_peak;
    return true;
  };

  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const std::size_t cand = candidates[k];
    // Search back: a gap of 1.66 average RR without a beat means the
    // threshold overshot; take the strongest skipped candidate at half threshold.
    if (recent_rr.size() >= 2 && !peaks.empty()) {
      const double avg_rr = mean_of(recent_rr);
      if (static_cast<double>(cand - peaks.back()) > 1.66 * avg_rr) {
        std::size_t best = 0;
        double best_val = 0.0;
        for (std::size_t j = last_candidate_pos; j < k; ++j) {
          const std::size_t c = candidates[j];
          if (c <= peaks.back() + refractory) continue;
          const double v = integrated[c];
          if (v > 0.5 * cfg.threshold_fraction * signal_peak && v > best_val) {
            best = c;
            best_val = v;
          }
        }
        if (best_val > 0.0) accept(best);
      }
    }
    if (integrated[cand] > cfg.threshold_fraction * signal_peak) {
      if (accept(cand)) last_candidate_pos = k + 1;
    }
  }

  if (peaks.empty()) throw Error(Errc::NoPeaksFound, "no candidate crossed the adaptive threshold");
  return peaks;
}

double heart_rate_bpm(double rr_interval_ms) {
  if (!(rr_interval_ms > 0.0)) {
    throw Error(Errc::NonPositiveInterval, "RR interval must be positive, got " + std::to_string(rr_interval_ms));
  }
  return 60000.0 / rr_interval_ms;
}

RrSeries rr_series(std::span<const std::size_t> peaks, double rate_hz) {
  if (peaks.size() < 2) throw Error(Errc::TooFewPeaks, "need at least two R peaks");
  if (!(rate_hz > 0.0)) throw Error(Errc::NonPositiveRate, "rate_hz must be positive");
  std::vector<double> intervals;
  intervals.reserve(peaks.size() - 1);
  for (std::size_t k = 0; k + 1 < peaks.size(); ++k) {
    if (peaks[k + 1] <= peaks[k]) throw Error(Errc::NonPositiveInterval, "peaks must be strictly increasing");
    intervals.push_back(static_cast<double>(peaks[k + 1] - peaks[k]) * 1000.0 / rate_hz);
  }
  auto rr = RrSeries::from_intervals(std::move(intervals));
  rr.source_peaks.assign(peaks.begin(), peaks.end());
  return rr;
}

HrvTimeDomain time_domain_metrics(const RrSeries& rr, double xx_ms) {
  const auto r = rr.accepted();
  const std::size_t n = r.size();
  if (n < 2) throw Error(Errc::TooFewIntervals, "need at least two unflagged RR intervals, have " + std::to_string(n));

  HrvTimeDomain m;
  m.xx_ms = xx_ms;
  m.mean_rr_ms = mean_of(r);
  m.sdnn_ms = population_std(r, m.mean_rr_ms);

  double ssd = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double d = r[i + 1] - r[i];
    ssd += d * d;
    if (std::abs(d) > xx_ms) ++m.nnxx_count;
  }
  m.rmssd_ms = std::sqrt(ssd / static_cast<double>(n - 1));
  m.pnnxx_pct = 100.0 * static_cast<double>(m.nnxx_count) / static_cast<double>(n - 1);

  std::vector<double> hr(n);
  std::transform(r.begin(), r.end(), hr.begin(), heart_rate_bpm);
  m.mean_hr_bpm = mean_of(hr);
  m.std_hr_bpm = population_std(hr, m.mean_hr_bpm);
  const auto [lo, hi] = std::minmax_element(hr.begin(), hr.end());
  m.min_hr_bpm = *lo;
  m.max_hr_bpm = *hi;
  return m;
}

PoincareMetrics poincare(const RrSeries& rr) {
  const auto r = rr.accepted();
  if (r.size() < 3) throw Error(Errc::TooFewIntervals, "Poincare analysis needs at least three intervals");
  PoincareMetrics p;
  const std::size_t m = r.size() - 1;
  p.points.reserve(m);
  std::vector<double> minor(m), major(m);
  for (std::size_t i = 0; i < m; ++i) {
    p.points.emplace_back(r[i], r[i + 1]);
    minor[i] = (r[i + 1] - r[i]) / std::sqrt(2.0);
    major[i] = (r[i + 1] + r[i]) / std::sqrt(2.0);
  }
  p.sd1_ms = population_std(minor, mean_of(minor));
  p.sd2_ms = population_std(major, mean_of(major));
  return p;
}

std::string_view to_string(StressLevel level) noexcept {
  switch (level) {
    case StressLevel::VeryLow: return "VeryLow";
    case StressLevel::Low: return "Low";
    case StressLevel::Moderate: return "Moderate";
    case StressLevel::Average: return "Average";
    case StressLevel::High: return "High";
  }
  return "Unknown";
}

StressReport stress_level(double hrv_score_ms) {
  if (!(hrv_score_ms >= 0.0)) {
    throw Error(Errc::NegativeScore, "HRV score must be non-negative, got " + std::to_string(hrv_score_ms));
  }
  StressLevel level = StressLevel::VeryLow;
  if (hrv_score_ms < 60.0) level = StressLevel::High;
  else if (hrv_score_ms < 71.0) level = StressLevel::Average;
  else if (hrv_score_ms < 81.0) level = StressLevel::Moderate;
  else if (hrv_score_ms < 90.0) level = StressLevel::Low;
  return {hrv_score_ms, level};
}

}  // namespace mywear::hrv
