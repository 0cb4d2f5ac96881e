#include "mywear/motion.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "mywear/error.hpp"

namespace mywear::motion {
namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

}  // namespace

ImuCalibration calibrate(std::span<const ImuSample> samples, const CalibrationConfig& cfg) {
  if (samples.size() < 2 ||
      static_cast<double>(samples.back().t_ms - samples.front().t_ms) < cfg.min_duration_ms) {
    throw Error(Errc::SignalTooShort, "calibration needs at least " + std::to_string(cfg.min_duration_ms) +
                                          " ms of still data");
  }
  const double n = static_cast<double>(samples.size());
  double mx = 0, my = 0, mz = 0;
  for (const auto& s : samples) {
    mx += s.ax;
    my += s.ay;
    mz += s.az;
  }
  mx /= n;
  my /= n;
  mz /= n;
  double vx = 0, vy = 0, vz = 0;
  for (const auto& s : samples) {
    vx += (s.ax - mx) * (s.ax - mx);
    vy += (s.ay - my) * (s.ay - my);
    vz += (s.az - mz) * (s.az - mz);
  }
  const double worst = std::sqrt(std::max({vx, vy, vz}) / n);
  if (worst > cfg.max_axis_std_g) {
    throw Error(Errc::NotStill, "axis standard deviation " + std::to_string(worst) + " g exceeds " +
                                    std::to_string(cfg.max_axis_std_g) + " g");
  }
  return {mx, my, mz - 1.0};
}

ImuSample apply_calibration(const ImuSample& s, const ImuCalibration& cal) {
  return {s.t_ms, s.ax - cal.offset_x, s.ay - cal.offset_y, s.az - cal.offset_z};
}

std::string_view to_string(OrientationLabel label) noexcept {
  switch (label) {
    case OrientationLabel::Upright: return "Upright";
    case OrientationLabel::BendRight: return "BendRight";
    case OrientationLabel::BendLeft: return "BendLeft";
    case OrientationLabel::BendForward: return "BendForward";
    case OrientationLabel::BendBack: return "BendBack";
    case OrientationLabel::Unknown: return "Unknown";
  }
  return "Unknown";
}

Orientation euler_angles(const ImuSample& raw, const ImuCalibration& cal) {
  const auto s = apply_calibration(raw, cal);
  const double x = s.ax, y = s.ay, z = s.az;
  if (x == 0.0 && y == 0.0 && z == 0.0) throw Error(Errc::ZeroVector, "acceleration vector is zero");
  Orientation o;
  o.roll_deg = std::atan2(y, std::hypot(x, z)) * kRadToDeg;
  o.pitch_deg = std::atan2(x, std::hypot(y, z)) * kRadToDeg;
  o.yaw_deg = std::atan2(std::hypot(x, y), z) * kRadToDeg;
  return o;
}

OrientationLabel orientation_label(double roll_deg, double pitch_deg, double bend_threshold_deg) {
  if (!std::isfinite(roll_deg) || !std::isfinite(pitch_deg)) return OrientationLabel::Unknown;
  const double ar = std::abs(roll_deg), ap = std::abs(pitch_deg);
  if (ar < bend_threshold_deg && ap < bend_threshold_deg) return OrientationLabel::Upright;
  if (ap >= ar) return pitch_deg > 0 ? OrientationLabel::BendForward : OrientationLabel::BendBack;
  return roll_deg > 0 ? OrientationLabel::BendRight : OrientationLabel::BendLeft;
}

double resultant_acceleration(const ImuSample& s) { return std::sqrt(s.ax * s.ax + s.ay * s.ay + s.az * s.az); }

double resultant_acceleration_si(double x, double y, double z) {
  return std::sqrt(x * x + y * y + z * z) / kGravity;
}

std::vector<GSample> resultant_trace(std::span<const ImuSample> samples) {
  std::vector<GSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back({s.t_ms, resultant_acceleration(s)});
  return out;
}

std::optional<FallEvent> FallDetector::push(std::int64_t t_ms, double g) {
  if (last_t_ && t_ms <= *last_t_) {
    throw Error(Errc::NonMonotonicTime, "timestamp " + std::to_string(t_ms) + " after " + std::to_string(*last_t_));
  }
  last_t_ = t_ms;
  std::optional<FallEvent> emitted;

  if (state_ == State::Impact) {
    if (g > current_.peak_g) current_.peak_g = g;
    if (g > th_.high_g) return std::nullopt;
    emitted = current_;
    state_ = State::Idle;
  }
  if (state_ == State::Dip) {
    if (g < current_.min_g) {
      current_.min_g = g;
      t_min_ = t_ms;
    }
    if (g > th_.high_g) {
      if (t_ms - t_min_ <= th_.recovery_ms) {
        current_.t_detected_ms = t_ms;
        current_.peak_g = g;
        state_ = State::Impact;
      } else {
        state_ = State::Idle;
      }
    }
    return emitted;
  }
  if (state_ == State::Idle && g < th_.low_g) {
    current_ = FallEvent{t_ms, t_ms, g, g};
    t_min_ = t_ms;
    state_ = State::Dip;
  }
  return emitted;
}

std::optional<FallEvent> FallDetector::flush() {
  if (state_ != State::Impact) return std::nullopt;
  state_ = State::Idle;
  return current_;
}

std::vector<FallEvent> detect_fall(std::span<const GSample> stream, const FallThresholds& thresholds) {
  FallDetector det(thresholds);
  std::vector<FallEvent> events;
  for (const auto& s : stream) {
    if (auto e = det.push(s.t_ms, s.g)) events.push_back(*e);
  }
  if (auto e = det.flush()) events.push_back(*e);
  return events;
}

std::optional<std::size_t> threshold_prediction(std::span<const GSample> window, const FallThresholds& th) {
  for (std::size_t i = 1; i < window.size(); ++i) {
    if (window[i].g >= th.low_g) continue;
    const double dt_s = static_cast<double>(window[i].t_ms - window[i - 1].t_ms) / 1000.0;
    if (dt_s <= 0.0) continue;
    const double slope = (window[i].g - window[i - 1].g) / dt_s;
    if (slope < -th.prediction_slope_g_per_s) return i;
  }
  return std::nullopt;
}

std::vector<double> fall_features(std::span<const GSample> window) {
  std::vector<double> x;
  x.reserve(window.size());
  for (const auto& s : window) x.push_back(s.g - 1.0);
  return x;
}

nn::LabeledSet fall_labeled_set(std::span<const std::vector<GSample>> windows, const FallThresholds& th) {
  nn::LabeledSet set;
  for (const auto& w : windows) {
    set.inputs.push_back(fall_features(w));
    set.labels.push_back(detect_fall(w, th).empty() ? 0 : 1);
  }
  return set;
}

FallPrediction predict_fall(std::span<const GSample> window, const nn::Network* model, const FallThresholds& th,
                            std::size_t window_length) {
  if (window.size() != window_length) {
    throw Error(Errc::WindowLengthMismatch, "fall window has " + std::to_string(window.size()) + " samples, expected " +
                                                std::to_string(window_length));
  }
  FallPrediction p;
  p.threshold_index = threshold_prediction(window, th);
  p.threshold_flag = p.threshold_index.has_value();
  if (model) {
    const auto prob = model->predict_proba(fall_features(window));
    p.cnn_fall_probability = prob.at(1);
    p.cnn_flag = prob[1] > prob[0];
  }
  return p;
}

nn::Network build_fall_network(std::uint64_t seed, std::size_t window_length) {
  nn::Network net({1, window_length});
  net.add(std::make_unique<nn::Conv1d>(1, 8, 5, 1));
  net.add(std::make_unique<nn::Relu>());
  net.add(std::make_unique<nn::MaxPool1d>(2, 2));
  net.add(std::make_unique<nn::Conv1d>(8, 16, 5, 1));
  net.add(std::make_unique<nn::Relu>());
  net.add(std::make_unique<nn::MaxPool1d>(2, 2));
  net.add(std::make_unique<nn::Conv1d>(16, 16, 3, 1));
  net.add(std::make_unique<nn::Relu>());
  net.add(std::make_unique<nn::Dense>(net.output_shape().size(), 2));
  net.init_he_uniform(seed);
  return net;
}

}  // namespace mywear::motion
