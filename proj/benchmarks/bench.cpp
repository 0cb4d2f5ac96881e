#include <benchmark/benchmark.h>

#include <random>

#include "mywear/beat_classifier.hpp"
#include "mywear/hrv.hpp"
#include "mywear/synthetic.hpp"
#include "mywear/telemetry.hpp"

using namespace mywear;

static void BeatNetForward(benchmark::State& state) {
  const auto net = beats::build_network({}, 1);
  std::mt19937_64 rng(1);
  const auto seg = synth::beat(BeatClass::V, rng);
  std::vector<double> x(seg.window.begin(), seg.window.end());
  for (auto _ : state) benchmark::DoNotOptimize(net.predict_proba(x));
}
BENCHMARK(BeatNetForward);

static void DetectRPeaks(benchmark::State& state) {
  synth::EcgConfig cfg;
  cfg.duration_s = static_cast<double>(state.range());
  cfg.rr_jitter_ms = 30;
  const auto ecg = synth::ecg(cfg);
  for (auto _ : state) benchmark::DoNotOptimize(hrv::detect_r_peaks(ecg.series));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(ecg.series.size()));
}
BENCHMARK(DetectRPeaks)->Arg(60)->Arg(240);

static void TimeDomainMetrics(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> rr(800, 40);
  std::vector<double> v(static_cast<std::size_t>(state.range()));
  for (auto& x : v) x = rr(rng);
  const auto series = RrSeries::from_intervals(v);
  for (auto _ : state) benchmark::DoNotOptimize(hrv::time_domain_metrics(series));
}
BENCHMARK(TimeDomainMetrics)->Arg(300)->Arg(5000);

static void EncryptFrame(benchmark::State& state) {
  telemetry::DeviceKey key;
  key.device_id = telemetry::DeviceId::from_u64(1);
  std::vector<std::uint8_t> payload(static_cast<std::size_t>(state.range()), 0x5a);
  std::uint64_t seq = 0;
  for (auto _ : state) benchmark::DoNotOptimize(telemetry::encrypt_frame(key, ++seq, Channel::Ecg, payload));
  state.SetBytesProcessed(state.iterations() * state.range());
}
BENCHMARK(EncryptFrame)->Arg(768)->Arg(65536);

BENCHMARK_MAIN();
