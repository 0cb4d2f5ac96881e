#include "mywear/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>

#include "mywear/error.hpp"

namespace mywear::synth {
namespace {

struct Wave {
  double centre_s;
  double width_s;
  double amplitude;
};

// Morphology per class, times relative to the R peak.
std::vector<Wave> morphology(BeatClass cls) {
  switch (cls) {
    case BeatClass::N:
      return {{-0.17, 0.025, 0.15}, {-0.03, 0.008, -0.12}, {0.0, 0.011, 1.0}, {0.03, 0.009, -0.25}, {0.28, 0.05, 0.30}};
    case BeatClass::S:
      return {{-0.12, 0.02, -0.10}, {-0.025, 0.007, -0.08}, {0.0, 0.009, 0.85}, {0.025, 0.008, -0.15}, {0.22, 0.04, 0.18}};
    case BeatClass::V:
      return {{0.0, 0.035, 1.0}, {0.07, 0.03, -0.55}, {0.32, 0.07, -0.40}};
    case BeatClass::F:
      return {{-0.15, 0.025, 0.08}, {0.0, 0.022, 1.0}, {0.045, 0.02, -0.35}, {0.30, 0.06, 0.05}};
    case BeatClass::Q:
      return {{-0.045, 0.003, 0.8}, {0.0, 0.04, 0.9}, {0.08, 0.03, -0.3}, {0.33, 0.06, -0.20}};
  }
  return {};
}

double render(const std::vector<Wave>& waves, double t) {
  double v = 0.0;
  for (const auto& w : waves) {
    const double z = (t - w.centre_s) / w.width_s;
    if (std::abs(z) < 8.0) v += w.amplitude * std::exp(-0.5 * z * z);
  }
  return v;
}

std::vector<Wave> jittered(BeatClass cls, std::mt19937_64& rng, double spread) {
  std::normal_distribution<double> n(0.0, 1.0);
  auto waves = morphology(cls);
  for (auto& w : waves) {
    if (w.centre_s != 0.0) w.centre_s += 0.006 * spread * n(rng);
    w.width_s *= std::max(0.5, 1.0 + 0.12 * spread * n(rng));
    w.amplitude *= std::max(0.3, 1.0 + 0.12 * spread * n(rng));
  }
  return waves;
}

}  // namespace

SyntheticEcg ecg(const EcgConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> n(0.0, 1.0);
  const auto samples = static_cast<std::size_t>(std::llround(cfg.duration_s * cfg.rate_hz));
  std::vector<double> x(samples, 0.0);
  std::vector<std::size_t> peaks;
  std::vector<BeatClass> classes;

  // First R peak half a beat in so the first complex is whole.
  double t_r = 0.5 * cfg.mean_rr_ms / 1000.0;
  std::size_t k = 0;
  while (true) {
    const auto idx = static_cast<std::size_t>(std::llround(t_r * cfg.rate_hz));
    if (idx >= samples) break;
    const BeatClass cls = k < cfg.beat_classes.size() ? cfg.beat_classes[k] : BeatClass::N;
    const auto waves = cfg.noise_mv > 0.0 ? jittered(cls, rng, 0.5) : morphology(cls);
    const double centre = static_cast<double>(idx) / cfg.rate_hz;
    const auto lo = static_cast<std::size_t>(std::max(0.0, (centre - 0.4) * cfg.rate_hz));
    const auto hi = std::min(samples, static_cast<std::size_t>((centre + 0.7) * cfg.rate_hz));
    for (std::size_t i = lo; i < hi; ++i) {
      x[i] += cfg.amplitude_mv * render(waves, static_cast<double>(i) / cfg.rate_hz - centre);
    }
    peaks.push_back(idx);
    classes.push_back(cls);
    double rr = cfg.mean_rr_ms + cfg.rr_jitter_ms * n(rng);
    rr = std::clamp(rr, 300.0, 2000.0);
    t_r = centre + rr / 1000.0;
    ++k;
  }
  if (cfg.noise_mv > 0.0) {
    for (double& v : x) v += cfg.noise_mv * n(rng);
  }
  return {make_sample_series(Channel::Ecg, cfg.rate_hz, cfg.t0_ms, std::move(x)), std::move(peaks),
          std::move(classes)};
}

BeatSegment beat(BeatClass cls, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n(0.0, 1.0);

  const double median_rr = 0.6 + 0.5 * u(rng);
  // Premature beats arrive early and are followed by a longer pause.
  const double next_rr = cls == BeatClass::S || cls == BeatClass::V ? median_rr * (1.15 + 0.2 * u(rng))
                                                                     : median_rr * (0.95 + 0.1 * u(rng));
  const auto span = std::min<std::size_t>(kBeatWindow, static_cast<std::size_t>(std::llround(1.2 * median_rr * kBeatRateHz)));

  const auto waves = jittered(cls, rng, 1.0);
  const auto next = jittered(BeatClass::N, rng, 1.0);
  const double wander_amp = 0.05 * u(rng), wander_f = 0.15 + 0.3 * u(rng), wander_ph = 2 * std::numbers::pi * u(rng);
  const double noise = 0.01 + 0.02 * u(rng);

  std::vector<double> v(span);
  for (std::size_t i = 0; i < span; ++i) {
    const double t = static_cast<double>(i) / kBeatRateHz;
    v[i] = render(waves, t) + render(next, t - next_rr) +
           wander_amp * std::sin(2 * std::numbers::pi * wander_f * t + wander_ph) + noise * n(rng);
  }
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double lo_v = *lo, range = *hi - *lo;
  BeatSegment seg;
  for (std::size_t i = 0; i < span; ++i) seg.window[i] = range > 0 ? (v[i] - lo_v) / range : 0.0;
  seg.label = cls;
  return seg;
}

std::vector<BeatSegment> beat_corpus(std::size_t count, std::uint64_t seed, const double (&shares)[kBeatClassCount]) {
  std::mt19937_64 rng(seed);
  double total = 0.0;
  for (double s : shares) total += s;
  std::vector<BeatSegment> out;
  out.reserve(count);
  // Deterministic class quotas, then shuffled order.
  std::vector<BeatClass> labels;
  for (std::size_t c = 0; c < kBeatClassCount; ++c) {
    const auto quota = static_cast<std::size_t>(std::llround(static_cast<double>(count) * shares[c] / total));
    labels.insert(labels.end(), quota, static_cast<BeatClass>(c));
  }
  while (labels.size() < count) labels.push_back(BeatClass::N);
  labels.resize(count);
  std::shuffle(labels.begin(), labels.end(), rng);
  for (auto cls : labels) out.push_back(beat(cls, rng));
  return out;
}

std::vector<motion::GSample> fall_trace(FallTraceKind kind, std::mt19937_64& rng, std::size_t samples, double rate_hz,
                                        std::int64_t t0_ms) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n(0.0, 1.0);
  const double dt = 1.0 / rate_hz;
  const double noise = 0.006 + 0.008 * u(rng);

  // Piecewise profile g(t), t in seconds.
  std::function<double(double)> profile = [](double) { return 1.0; };
  switch (kind) {
    case FallTraceKind::Rest:
      break;
    case FallTraceKind::Fall: {
      const double onset = 0.1 + 0.3 * u(rng);
      const double drop = 0.06 + 0.14 * u(rng);
      const double min_g = 0.15 + 0.55 * u(rng);
      const double rise = 0.06 + 0.16 * u(rng);
      const double peak = 1.5 + 1.5 * u(rng);
      const double settle = 0.1 + 0.1 * u(rng);
      profile = [=](double t) {
        if (t < onset) return 1.0;
        if (t < onset + drop) return 1.0 - (1.0 - min_g) * (t - onset) / drop;
        const double t1 = onset + drop;
        if (t < t1 + rise) return min_g + (peak - min_g) * (t - t1) / rise;
        const double t2 = t1 + rise;
        if (t < t2 + settle) return peak - (peak - 1.0) * (t - t2) / settle;
        return 1.0;
      };
      break;
    }
    case FallTraceKind::SlowDip: {
      const double t_min = 0.2 + 0.3 * u(rng);
      const double min_g = 0.5 + 0.35 * u(rng);
      const double fall_time = 0.15 + 0.2 * u(rng);
      const double rise_time = 0.45 + 0.4 * u(rng);
      profile = [=](double t) {
        if (t < t_min - fall_time) return 1.0;
        if (t < t_min) {
          const double z = (t_min - t) / fall_time;
          return min_g + (1.0 - min_g) * z * z;
        }
        if (t < t_min + rise_time) {
          const double z = (t - t_min) / rise_time;
          return min_g + (1.0 - min_g) * z * z;
        }
        return 1.0;
      };
      break;
    }
    case FallTraceKind::ShallowDip: {
      const double centre = 0.2 + 0.6 * u(rng);
      const double depth = 0.03 + 0.04 * u(rng);
      const double width = 0.05 + 0.1 * u(rng);
      profile = [=](double t) {
        const double z = (t - centre) / width;
        return 1.0 - depth * std::exp(-0.5 * z * z);
      };
      break;
    }
    case FallTraceKind::ImpactOnly: {
      const double centre = 0.2 + 0.6 * u(rng);
      const double height = 0.4 + 1.2 * u(rng);
      const double width = 0.02 + 0.05 * u(rng);
      profile = [=](double t) {
        const double z = (t - centre) / width;
        return 1.0 + height * std::exp(-0.5 * z * z);
      };
      break;
    }
  }
  std::vector<motion::GSample> out(samples);
  for (std::size_t i = 0; i < samples; ++i) {
    const double t = static_cast<double>(i) * dt;
    out[i].t_ms = t0_ms + static_cast<std::int64_t>(std::llround(t * 1000.0));
    out[i].g = std::max(0.0, profile(t) + noise * n(rng));
  }
  return out;
}

std::vector<std::vector<motion::GSample>> fall_corpus(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::vector<motion::GSample>> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double r = u(rng);
    FallTraceKind kind = FallTraceKind::Fall;
    if (r >= 0.5) {
      const double q = u(rng);
      kind = q < 0.25   ? FallTraceKind::Rest
             : q < 0.6  ? FallTraceKind::SlowDip
             : q < 0.8  ? FallTraceKind::ShallowDip
                        : FallTraceKind::ImpactOnly;
    }
    out.push_back(fall_trace(kind, rng));
  }
  return out;
}

SampleSeries emg(const EmgConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> n(0.0, 1.0);
  const auto samples = static_cast<std::size_t>(std::llround(cfg.duration_s * cfg.rate_hz));
  std::vector<double> x(samples);
  for (std::size_t i = 0; i < samples; ++i) {
    const double t = static_cast<double>(i) / cfg.rate_hz;
    double amp = 0.0;
    for (const auto& b : cfg.bursts) {
      if (t >= b.start_s && t < b.start_s + b.duration_s) {
        const double phase = (t - b.start_s) / b.duration_s;
        amp += b.amplitude_mv * std::sin(std::numbers::pi * phase) * std::sin(std::numbers::pi * phase);
      }
    }
    x[i] = cfg.rest_noise_mv * n(rng) + amp * n(rng);
  }
  return make_sample_series(cfg.channel, cfg.rate_hz, cfg.t0_ms, std::move(x));
}

std::vector<ImuSample> imu(const ImuConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> n(0.0, 1.0);
  const auto samples = static_cast<std::size_t>(std::llround(cfg.duration_s * cfg.rate_hz));
  std::vector<ImuSample> out(samples);
  for (std::size_t i = 0; i < samples; ++i) {
    const double t = static_cast<double>(i) / cfg.rate_hz;
    double pitch = 0.0;
    if (cfg.bend_at_s && t >= *cfg.bend_at_s) pitch = cfg.bend_pitch_deg * std::numbers::pi / 180.0;
    // Gravity direction for a forward bend rotates into +x.
    double gx = std::sin(pitch), gy = 0.0, gz = std::cos(pitch);
    double scale = 1.0;
    for (double f : cfg.falls_at_s) {
      const double dt = t - f;
      if (dt >= 0.0 && dt < 0.15) scale = 1.0 - 0.7 * dt / 0.15;          // free fall to 0.3 g
      else if (dt >= 0.15 && dt < 0.25) scale = 0.3 + 1.7 * (dt - 0.15) / 0.1;  // impact to 2.0 g
      else if (dt >= 0.25 && dt < 0.45) scale = 2.0 - (dt - 0.25) / 0.2;      // settle
    }
    out[i].t_ms = cfg.t0_ms + static_cast<std::int64_t>(std::llround(t * 1000.0));
    out[i].ax = scale * gx + cfg.noise_g * n(rng);
    out[i].ay = scale * gy + cfg.noise_g * n(rng);
    out[i].az = scale * gz + cfg.noise_g * n(rng);
  }
  return out;
}

}  // namespace mywear::synth
