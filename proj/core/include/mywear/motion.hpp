#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "mywear/nn.hpp"
#include "mywear/signal.hpp"

namespace mywear::motion {

/// Standard gravity used when converting SI accelerations to g.
inline constexpr double kGravity = 9.8;

struct ImuCalibration {
  double offset_x = 0.0;
  double offset_y = 0.0;
  double offset_z = 0.0;
};

struct CalibrationConfig {
  double min_duration_ms = 1000.0;
  double max_axis_std_g = 0.05;
};

/// Offsets = per-axis mean minus the rest vector (0, 0, 1 g), captured while
/// the wearer stands still. Throws SignalTooShort, NotStill.
ImuCalibration calibrate(std::span<const ImuSample> samples, const CalibrationConfig& cfg = {});

ImuSample apply_calibration(const ImuSample& s, const ImuCalibration& cal);

enum class OrientationLabel { Upright, BendRight, BendLeft, BendForward, BendBack, Unknown };
std::string_view to_string(OrientationLabel label) noexcept;

struct Orientation {
  double roll_deg = 0.0;
  double pitch_deg = 0.0;
  double yaw_deg = 0.0;
  OrientationLabel label = OrientationLabel::Unknown;
};

/// Roll = atan(Y / sqrt(X^2 + Z^2)), pitch = atan(X / sqrt(Y^2 + Z^2)),
/// yaw = atan(sqrt(X^2 + Y^2) / Z), in degrees, after subtracting the
/// calibration offsets. Evaluated with atan2. Throws ZeroVector. The label
/// field is left Unknown; see orientation_label.
Orientation euler_angles(const ImuSample& s, const ImuCalibration& cal = {});

/// |roll|, |pitch| below the threshold -> Upright; otherwise the axis with
/// the larger magnitude decides the bend direction, pitch winning ties.
/// Yaw is ignored (degenerate without a magnetometer). Non-finite -> Unknown.
OrientationLabel orientation_label(double roll_deg, double pitch_deg, double bend_threshold_deg = 20.0);

/// Magnitude of an acceleration already expressed in g.
double resultant_acceleration(const ImuSample& s);
/// Magnitude in g of an acceleration given in m/s^2.
double resultant_acceleration_si(double x, double y, double z);

struct GSample {
  std::int64_t t_ms = 0;
  double g = 0.0;
};

std::vector<GSample> resultant_trace(std::span<const ImuSample> samples);

struct FallThresholds {
  double low_g = 0.90;
  double high_g = 1.0;
  std::int64_t recovery_ms = 300;
  /// Baseline predictor: a drop under low_g must fall faster than this (g/s).
  double prediction_slope_g_per_s = 1.5;
};

struct FallEvent {
  std::int64_t t_predicted_ms = 0;  // first sample below low_g
  std::int64_t t_detected_ms = 0;   // first sample back above high_g
  double min_g = 0.0;
  double peak_g = 0.0;
};

/// Per-stream fall state machine. An event fires when g drops below low_g and
/// then exceeds high_g no later than recovery_ms after the lowest sample of
/// the dip; the event closes once g returns to high_g or below, recording the
/// impact peak. One instance per stream; not thread-safe.
class FallDetector {
 public:
  explicit FallDetector(FallThresholds thresholds = {}) : th_(thresholds) {}

  /// Throws NonMonotonicTime if t_ms does not increase.
  std::optional<FallEvent> push(std::int64_t t_ms, double g);
  /// Closes an open impact at end of stream.
  std::optional<FallEvent> flush();

 private:
  enum class State { Idle, Dip, Impact };

  FallThresholds th_;
  State state_ = State::Idle;
  std::optional<std::int64_t> last_t_;
  FallEvent current_{};
  std::int64_t t_min_ = 0;
};

std::vector<FallEvent> detect_fall(std::span<const GSample> stream, const FallThresholds& thresholds = {});

/// Fall-prediction window: 50 samples at 50 Hz by default.
inline constexpr std::size_t kFallWindow = 50;

struct FallPrediction {
  bool threshold_flag = false;
  std::optional<std::size_t> threshold_index;  // first sample that triggered the baseline
  std::optional<double> cnn_fall_probability;
  bool cnn_flag = false;
};

/// Threshold baseline: first sample below low_g whose slope from the previous
/// sample is steeper than -prediction_slope_g_per_s.
std::optional<std::size_t> threshold_prediction(std::span<const GSample> window, const FallThresholds& th = {});

/// Runs the threshold baseline and, when a model is given, the CNN head
/// (class 1 = fall). Throws WindowLengthMismatch.
FallPrediction predict_fall(std::span<const GSample> window, const nn::Network* model = nullptr,
                            const FallThresholds& th = {}, std::size_t window_length = kFallWindow);

/// Three conv layers (8, 16, 16 filters) with two max-pool stages and a
/// two-way softmax head over a 1 x window_length input of g - 1.
nn::Network build_fall_network(std::uint64_t seed, std::size_t window_length = kFallWindow);

/// CNN input encoding of a window.
std::vector<double> fall_features(std::span<const GSample> window);

/// Training set for the fall CNN: each window labelled 1 when detect_fall
/// finds an event in it.
nn::LabeledSet fall_labeled_set(std::span<const std::vector<GSample>> windows, const FallThresholds& th = {});

}  // namespace mywear::motion
