#include <doctest.h>

#include <cmath>
#include <random>

#include "mywear/error.hpp"
#include "mywear/hrv.hpp"
#include "mywear/synthetic.hpp"
#include "oracles.hpp"

using namespace mywear;

namespace {

SampleSeries bump_train(const std::vector<double>& centers_s, double duration_s, double rate_hz, double sigma_s = 0.015) {
  std::vector<double> v(static_cast<std::size_t>(duration_s * rate_hz));
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double t = static_cast<double>(i) / rate_hz;
    for (double c : centers_s) v[i] += std::exp(-0.5 * std::pow((t - c) / sigma_s, 2));
  }
  return make_sample_series(Channel::Ecg, rate_hz, 0, v);
}

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an mywear::Error");
  return Errc::Io;
}

}  // namespace

TEST_CASE("R peaks of a 1 Hz bump train land on the bump centres") {
  std::vector<double> centers;
  for (int k = 0; k < 10; ++k) centers.push_back(0.5 + k);
  const auto peaks = hrv::detect_r_peaks(bump_train(centers, 10.0, 250.0));
  REQUIRE(peaks.size() == 10);
  for (std::size_t k = 0; k < peaks.size(); ++k) {
    CHECK(std::abs(static_cast<double>(peaks[k]) - centers[k] * 250.0) <= 1.0);
  }
}

TEST_CASE("refractory period suppresses a second bump 100 ms later") {
  const auto peaks = hrv::detect_r_peaks(bump_train({1.0, 1.1}, 4.0, 250.0, 0.01));
  CHECK(peaks.size() == 1);
}

TEST_CASE("detector errors") {
  CHECK(code_of([] { hrv::detect_r_peaks(make_sample_series(Channel::Ecg, 250, 0, std::vector<double>(2500))); }) ==
        Errc::NoPeaksFound);
  CHECK(code_of([] { hrv::detect_r_peaks(make_sample_series(Channel::Ecg, 250, 0, std::vector<double>(100, 1.0))); }) ==
        Errc::SignalTooShort);
  CHECK(code_of([] { hrv::detect_r_peaks(make_sample_series(Channel::EmgBicep, 250, 0, std::vector<double>(2500))); }) ==
        Errc::WrongChannel);
}

TEST_CASE("detector recovers synthetic ECG beats with jitter and noise") {
  synth::EcgConfig cfg;
  cfg.duration_s = 60;
  cfg.rr_jitter_ms = 40;
  cfg.noise_mv = 0.03;
  cfg.seed = 9;
  const auto ecg = synth::ecg(cfg);
  const auto peaks = hrv::detect_r_peaks(ecg.series);
  REQUIRE(peaks.size() == ecg.r_peaks.size());
  for (std::size_t k = 0; k < peaks.size(); ++k) {
    CHECK(std::abs(static_cast<long>(peaks[k]) - static_cast<long>(ecg.r_peaks[k])) <= 2);
  }
}

TEST_CASE("heart rate from RR") {
  CHECK(hrv::heart_rate_bpm(1000) == 60.0);
  CHECK(hrv::heart_rate_bpm(800) == 75.0);
  CHECK(hrv::heart_rate_bpm(600) == 100.0);
  CHECK(code_of([] { hrv::heart_rate_bpm(0); }) == Errc::NonPositiveInterval);
}

TEST_CASE("rr_series from peak indices") {
  CHECK(hrv::rr_series(std::vector<std::size_t>{0, 125, 250}, 125).intervals_ms == std::vector<double>{1000, 1000});
  CHECK(hrv::rr_series(std::vector<std::size_t>{0, 100}, 125).intervals_ms == std::vector<double>{800});
  CHECK(code_of([] { hrv::rr_series(std::vector<std::size_t>{0}, 125); }) == Errc::TooFewPeaks);
  CHECK(code_of([] { hrv::rr_series(std::vector<std::size_t>{5, 5}, 125); }) == Errc::NonPositiveInterval);
}

TEST_CASE("time-domain metrics on hand-computed fixtures") {
  const auto flat = hrv::time_domain_metrics(RrSeries::from_intervals({1000, 1000, 1000}));
  CHECK(flat.mean_rr_ms == 1000);
  CHECK(flat.sdnn_ms == 0);
  CHECK(flat.rmssd_ms == 0);
  CHECK(flat.nnxx_count == 0);

  const auto two = hrv::time_domain_metrics(RrSeries::from_intervals({800, 1000}));
  CHECK(two.mean_rr_ms == 900);
  CHECK(two.rmssd_ms == 200);
  CHECK(two.mean_hr_bpm == doctest::Approx(67.5));
  CHECK(two.sdnn_ms == 100);
  CHECK(two.nnxx_count == 1);
  CHECK(two.pnnxx_pct == 100.0);

  CHECK(code_of([] { hrv::time_domain_metrics(RrSeries::from_intervals({800})); }) == Errc::TooFewIntervals);
  // Flagged intervals do not count towards the minimum.
  CHECK(code_of([] { hrv::time_domain_metrics(RrSeries::from_intervals({800, 3000})); }) == Errc::TooFewIntervals);
}

TEST_CASE("flagged intervals are excluded from the metrics") {
  const auto m = hrv::time_domain_metrics(RrSeries::from_intervals({800, 100, 1000, 5000}));
  CHECK(m.mean_rr_ms == 900);
  CHECK(m.rmssd_ms == 200);
}

TEST_CASE("time-domain metrics match the brute-force oracle on 300 random intervals") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(400, 1400);
  std::vector<double> rr(300);
  for (auto& v : rr) v = u(rng);
  const auto m = hrv::time_domain_metrics(RrSeries::from_intervals(rr), 50);
  const auto o = oracle::hrv(rr, 50);
  CHECK(std::abs(m.mean_rr_ms - o.mean_rr) <= 1e-9);
  CHECK(std::abs(m.sdnn_ms - o.sdnn) <= 1e-9);
  CHECK(std::abs(m.rmssd_ms - o.rmssd) <= 1e-9);
  CHECK(m.nnxx_count == o.nnxx);
  CHECK(std::abs(m.pnnxx_pct - o.pnnxx) <= 1e-9);
}

TEST_CASE("Poincare closed forms") {
  const auto flat = hrv::poincare(RrSeries::from_intervals({900, 900, 900, 900}));
  CHECK(flat.sd1_ms == 0);
  CHECK(flat.sd2_ms == 0);
  CHECK(flat.points.size() == 3);

  std::vector<double> alt;
  for (int i = 0; i < 41; ++i) alt.push_back(i % 2 ? 1000 : 800);
  const auto a = hrv::poincare(RrSeries::from_intervals(alt));
  CHECK(a.sd1_ms == doctest::Approx(100 * std::sqrt(2.0)).epsilon(1e-12));
  CHECK(a.sd2_ms == doctest::Approx(0).epsilon(1e-9));

  CHECK(code_of([] { hrv::poincare(RrSeries::from_intervals({800, 900})); }) == Errc::TooFewIntervals);
}

TEST_CASE("Poincare rotation preserves total variance") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(500, 1300);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> rr(3 + trial * 7);
    for (auto& v : rr) v = u(rng);
    const auto p = hrv::poincare(RrSeries::from_intervals(rr));
    auto pvar = [](auto begin, auto end) {
      const double n = static_cast<double>(end - begin);
      double m = 0, s = 0;
      for (auto it = begin; it != end; ++it) m += *it;
      m /= n;
      for (auto it = begin; it != end; ++it) s += (*it - m) * (*it - m);
      return s / n;
    };
    const double total = pvar(rr.begin(), rr.end() - 1) + pvar(rr.begin() + 1, rr.end());
    CHECK(std::abs(p.sd1_ms * p.sd1_ms + p.sd2_ms * p.sd2_ms - total) <= 1e-9 * std::max(1.0, total));
  }
}

TEST_CASE("stress bands and boundaries") {
  using hrv::StressLevel;
  CHECK(hrv::stress_level(71.87).level == StressLevel::Moderate);
  CHECK(hrv::stress_level(95).level == StressLevel::VeryLow);
  CHECK(hrv::stress_level(59.999).level == StressLevel::High);
  CHECK(hrv::stress_level(0).level == StressLevel::High);
  CHECK(hrv::stress_level(60).level == StressLevel::Average);
  CHECK(hrv::stress_level(70.99).level == StressLevel::Average);
  CHECK(hrv::stress_level(71).level == StressLevel::Moderate);
  CHECK(hrv::stress_level(80.5).level == StressLevel::Moderate);
  CHECK(hrv::stress_level(81).level == StressLevel::Low);
  CHECK(hrv::stress_level(89.99).level == StressLevel::Low);
  CHECK(hrv::stress_level(90).level == StressLevel::VeryLow);
  CHECK(code_of([] { hrv::stress_level(-0.1); }) == Errc::NegativeScore);
  CHECK(code_of([] { hrv::stress_level(std::nan("")); }) == Errc::NegativeScore);
}
