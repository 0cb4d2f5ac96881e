#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace mywear {

/// Sensor channels. The numeric values double as the wire channel byte of a
/// telemetry frame; the accelerometer axes only ever travel as wire channels
/// and are reassembled into ImuSample on the receiving side.
enum class Channel : std::uint8_t {
  Ecg = 0,
  EmgBicep = 1,
  EmgChest = 2,
  Temperature = 3,
  AccelX = 4,
  AccelY = 5,
  AccelZ = 6,
};

std::string_view to_string(Channel c) noexcept;
std::optional<Channel> channel_from_string(std::string_view name) noexcept;
std::optional<Channel> channel_from_byte(std::uint8_t b) noexcept;
bool is_emg(Channel c) noexcept;

/// Uniformly sampled scalar signal. Immutable once built; construct through
/// make_sample_series so that every downstream stage can assume finite values.
class SampleSeries {
 public:
  Channel channel() const noexcept { return channel_; }
  double rate_hz() const noexcept { return rate_hz_; }
  std::int64_t t0_ms() const noexcept { return t0_ms_; }
  std::span<const double> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  double duration_ms() const noexcept { return 1000.0 * static_cast<double>(values_.size()) / rate_hz_; }

  /// Timestamp of sample i, rounded to the nearest millisecond.
  std::int64_t time_of(std::size_t i) const noexcept;

 private:
  friend SampleSeries make_sample_series(Channel, double, std::int64_t, std::vector<double>);
  SampleSeries(Channel c, double rate, std::int64_t t0, std::vector<double> v)
      : channel_(c), rate_hz_(rate), t0_ms_(t0), values_(std::move(v)) {}

  Channel channel_;
  double rate_hz_;
  std::int64_t t0_ms_;
  std::vector<double> values_;
};

/// Throws NonPositiveRate, EmptySignal or NonFiniteSample.
SampleSeries make_sample_series(Channel channel, double rate_hz, std::int64_t t0_ms,
                                std::vector<double> values);

/// Sub-series covering [start_ms, start_ms + len_ms) measured from t0.
/// Throws OutOfRange unless the window lies inside the series.
SampleSeries slice_window(const SampleSeries& series, std::int64_t start_ms, std::int64_t len_ms);

/// Physiological bounds for a single RR interval.
inline constexpr double kMinRrMs = 250.0;
inline constexpr double kMaxRrMs = 2500.0;

/// RR intervals between consecutive R peaks. Intervals outside
/// [kMinRrMs, kMaxRrMs] are flagged and kept for audit; metrics skip them.
struct RrSeries {
  std::vector<double> intervals_ms;
  std::vector<std::size_t> source_peaks;
  std::vector<bool> flagged;

  /// Builds a series from intervals alone and applies the gate.
  static RrSeries from_intervals(std::vector<double> intervals_ms);

  std::vector<double> accepted() const;
  std::size_t flagged_count() const;
};

bool outside_rr_gate(double interval_ms) noexcept;

enum class BeatClass : std::uint8_t { N = 0, S = 1, V = 2, F = 3, Q = 4 };
inline constexpr std::size_t kBeatClassCount = 5;
inline constexpr std::size_t kBeatWindow = 187;
inline constexpr double kBeatRateHz = 125.0;

std::string_view to_string(BeatClass c) noexcept;
std::optional<BeatClass> beat_class_from_index(int index) noexcept;
inline bool is_abnormal(BeatClass c) noexcept { return c != BeatClass::N; }

struct BeatSegment {
  std::array<double, kBeatWindow> window{};
  std::optional<BeatClass> label;
};

/// One timestamped sample at wire precision.
struct TimedSample {
  std::int64_t t_ms = 0;
  float value = 0.0f;
  bool operator==(const TimedSample&) const = default;
};

struct ImuSample {
  std::int64_t t_ms = 0;
  double ax = 0.0;
  double ay = 0.0;
  double az = 0.0;
};

}  // namespace mywear
