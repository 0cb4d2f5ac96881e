#include <doctest.h>

#include <cmath>
#include <numbers>

#include "mywear/emg.hpp"
#include "mywear/error.hpp"
#include "mywear/synthetic.hpp"

using namespace mywear;
using namespace mywear::emg;

namespace {

SampleSeries emg_series(std::vector<double> v, double rate = 1000.0) {
  return make_sample_series(Channel::EmgBicep, rate, 0, std::move(v));
}

// Rest wobble for the first second, then Gaussian bumps at the given times.
SampleSeries bumpy_envelope(const std::vector<double>& centers_s, double height) {
  std::vector<double> v(4000);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double t = static_cast<double>(i) / 1000.0;
    v[i] = 0.1 + 0.01 * std::sin(2 * std::numbers::pi * 7 * t);
    for (double c : centers_s) v[i] += height * std::exp(-0.5 * std::pow((t - c) / 0.02, 2));
  }
  return emg_series(v);
}

}  // namespace

TEST_CASE("envelope of a sine is its RMS") {
  std::vector<double> v(3000);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.8 * std::sin(2 * std::numbers::pi * 50 * static_cast<double>(i) / 1000.0);
  const auto env = emg_envelope(emg_series(v));
  for (std::size_t i = 200; i < 2800; i += 97) CHECK(env.values()[i] == doctest::Approx(0.8 / std::sqrt(2.0)).epsilon(1e-3));
}

TEST_CASE("envelope of zero or DC input is zero") {
  for (double c : {0.0, 2.5}) {
    const auto env = emg_envelope(emg_series(std::vector<double>(500, c)));
    for (double e : env.values()) CHECK(e == doctest::Approx(0.0));
  }
}

TEST_CASE("envelope keeps rate and start, and refuses non-EMG channels") {
  const auto raw = make_sample_series(Channel::EmgChest, 500, 1234, std::vector<double>(100, 1.0));
  const auto env = emg_envelope(raw);
  CHECK(env.rate_hz() == 500);
  CHECK(env.t0_ms() == 1234);
  CHECK(env.size() == 100);
  CHECK_THROWS_AS(emg_envelope(make_sample_series(Channel::Ecg, 500, 0, {1.0})), Error);
}

TEST_CASE("rest baseline") {
  const auto env = emg_series({1, 3, 1, 3, 100, 100});
  const auto b = estimate_rest_baseline(env, 4.0);
  CHECK(b.mean == 2.0);
  CHECK(b.sigma == 1.0);
}

TEST_CASE("activity peaks") {
  const auto flat = emg_series(std::vector<double>(2000, 0.2));
  CHECK(detect_activity_peaks(flat, estimate_rest_baseline(flat, 1000)).empty());

  const auto two = bumpy_envelope({1.5, 2.5}, 0.5);
  const auto base = estimate_rest_baseline(two, 1000);
  CHECK(base.mean + 5 * base.sigma < 0.6);
  const auto peaks = detect_activity_peaks(two, base);
  REQUIRE(peaks.size() == 2);
  CHECK(peaks[0].t_ms == 1500);
  CHECK(peaks[1].t_ms == 2500);

  const auto close = bumpy_envelope({1.5, 1.6}, 0.5);
  const auto merged = detect_activity_peaks(close, estimate_rest_baseline(close, 1000));
  CHECK(merged.size() == 1);
}

TEST_CASE("merging keeps the taller of two close peaks") {
  std::vector<double> v(2000, 0.0);
  v[1200] = 1.0;
  v[1300] = 2.0;
  v[1800] = 1.5;
  const auto peaks = detect_activity_peaks(emg_series(v), {0.0, 0.1});
  REQUIRE(peaks.size() == 2);
  CHECK(peaks[0].t_ms == 1300);
  CHECK(peaks[0].amplitude == 2.0);
  CHECK(peaks[1].t_ms == 1800);
}

TEST_CASE("intensity bins") {
  auto at = [](double amp) { return std::vector<ActivityPeak>{{0, 0, amp}}; };
  CHECK(grade_intensity({}, 1.0) == Intensity::Rest);
  CHECK(grade_intensity(at(0.05), 1.0) == Intensity::Rest);
  CHECK(grade_intensity(at(0.1), 1.0) == Intensity::Light);
  CHECK(grade_intensity(at(0.5), 1.0) == Intensity::Moderate);
  CHECK(grade_intensity(at(0.7), 1.0) == Intensity::High);
  CHECK(grade_intensity(at(1.0), 1.0) == Intensity::High);
  CHECK(grade_intensity(at(1.0), 2.0) == Intensity::Moderate);
  CHECK_THROWS_AS(grade_intensity(at(1.0), 0.0), Error);
}

TEST_CASE("whole chain on synthetic EMG finds every burst") {
  synth::EmgConfig cfg;
  cfg.duration_s = 10;
  cfg.bursts = {{2.0, 0.5, 0.5}, {5.0, 0.5, 0.8}, {8.0, 0.5, 0.3}};
  const auto act = analyze_muscle(synth::emg(cfg));
  REQUIRE(act.peaks.size() == 3);
  CHECK(act.peaks[0].t_ms >= 2000);
  CHECK(act.peaks[0].t_ms <= 2500);
  CHECK(act.peaks[1].amplitude > act.peaks[0].amplitude);
  CHECK(act.intensity != Intensity::Rest);
}
