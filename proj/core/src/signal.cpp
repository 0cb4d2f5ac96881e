#include "mywear/signal.hpp"

#include <cmath>
#include <string>

#include "mywear/error.hpp"

namespace mywear {

std::string_view to_string(Channel c) noexcept {
  switch (c) {
    case Channel::Ecg: return "ecg";
    case Channel::EmgBicep: return "emg_bicep";
    case Channel::EmgChest: return "emg_chest";
    case Channel::Temperature: return "temperature";
    case Channel::AccelX: return "accel_x";
    case Channel::AccelY: return "accel_y";
    case Channel::AccelZ: return "accel_z";
  }
  return "unknown";
}

std::optional<Channel> channel_from_string(std::string_view name) noexcept {
  for (std::uint8_t b = 0; b <= 6; ++b) {
    auto c = static_cast<Channel>(b);
    if (to_string(c) == name) return c;
  }
  return std::nullopt;
}

std::optional<Channel> channel_from_byte(std::uint8_t b) noexcept {
  if (b > 6) return std::nullopt;
  return static_cast<Channel>(b);
}

bool is_emg(Channel c) noexcept { return c == Channel::EmgBicep || c == Channel::EmgChest; }

std::int64_t SampleSeries::time_of(std::size_t i) const noexcept {
  return t0_ms_ + static_cast<std::int64_t>(std::llround(1000.0 * static_cast<double>(i) / rate_hz_));
}

SampleSeries make_sample_series(Channel channel, double rate_hz, std::int64_t t0_ms,
                                std::vector<double> values) {
  if (!(rate_hz > 0.0) || !std::isfinite(rate_hz)) {
    throw Error(Errc::NonPositiveRate, "rate_hz must be positive, got " + std::to_string(rate_hz));
  }
  if (values.empty()) throw Error(Errc::EmptySignal, "series has no samples");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw Error(Errc::NonFiniteSample, "sample " + std::to_string(i) + " is not finite");
    }
  }
  return SampleSeries(channel, rate_hz, t0_ms, std::move(values));
}

SampleSeries slice_window(const SampleSeries& series, std::int64_t start_ms, std::int64_t len_ms) {
  if (start_ms < 0 || len_ms <= 0) {
    throw Error(Errc::OutOfRange, "window start/length must be non-negative/positive");
  }
  const double rate = series.rate_hz();
  const auto first = static_cast<std::size_t>(std::llround(static_cast<double>(start_ms) * rate / 1000.0));
  const auto count = static_cast<std::size_t>(std::llround(static_cast<double>(len_ms) * rate / 1000.0));
  if (count == 0 || first + count > series.size()) {
    throw Error(Errc::OutOfRange, "window [" + std::to_string(start_ms) + ", " +
                                      std::to_string(start_ms + len_ms) + ") ms exceeds series of " +
                                      std::to_string(series.duration_ms()) + " ms");
  }
  auto v = series.values();
  std::vector<double> out(v.begin() + static_cast<std::ptrdiff_t>(first),
                          v.begin() + static_cast<std::ptrdiff_t>(first + count));
  return make_sample_series(series.channel(), rate, series.t0_ms() + start_ms, std::move(out));
}

bool outside_rr_gate(double interval_ms) noexcept {
  return !(interval_ms >= kMinRrMs && interval_ms <= kMaxRrMs);
}

RrSeries RrSeries::from_intervals(std::vector<double> intervals_ms) {
  RrSeries rr;
  rr.flagged.reserve(intervals_ms.size());
  for (double v : intervals_ms) rr.flagged.push_back(outside_rr_gate(v));
  rr.intervals_ms = std::move(intervals_ms);
  return rr;
}

std::vector<double> RrSeries::accepted() const {
  std::vector<double> out;
  out.reserve(intervals_ms.size());
  for (std::size_t i = 0; i < intervals_ms.size(); ++i) {
    if (i >= flagged.size() || !flagged[i]) out.push_back(intervals_ms[i]);
  }
  return out;
}

std::size_t RrSeries::flagged_count() const {
  std::size_t n = 0;
  for (bool f : flagged) n += f ? 1 : 0;
  return n;
}

std::string_view to_string(BeatClass c) noexcept {
  switch (c) {
    case BeatClass::N: return "N";
    case BeatClass::S: return "S";
    case BeatClass::V: return "V";
    case BeatClass::F: return "F";
    case BeatClass::Q: return "Q";
  }
  return "?";
}

std::optional<BeatClass> beat_class_from_index(int index) noexcept {
  if (index < 0 || index >= static_cast<int>(kBeatClassCount)) return std::nullopt;
  return static_cast<BeatClass>(index);
}

}  // namespace mywear
