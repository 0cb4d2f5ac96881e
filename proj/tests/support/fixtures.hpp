#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mywear/beat_classifier.hpp"
#include "mywear/config.hpp"
#include "mywear/csv_io.hpp"
#include "mywear/synthetic.hpp"

namespace fixtures {

inline std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "mywear_tests" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Labels every beat with one class; the probability vector is one-hot.
class ConstantPredictor final : public mywear::beats::BeatPredictor {
 public:
  explicit ConstantPredictor(mywear::BeatClass c) : c_(c) {}
  std::array<double, mywear::kBeatClassCount> predict(std::span<const double, mywear::kBeatWindow>) const override {
    std::array<double, mywear::kBeatClassCount> p{};
    p[static_cast<std::size_t>(c_)] = 1.0;
    return p;
  }
  std::string model_hash() const override { return std::string("constant-") + std::string(mywear::to_string(c_)); }

 private:
  mywear::BeatClass c_;
};

// Short windows so a few minutes of synthetic data span several of them.
inline mywear::pipeline::PipelineConfig short_windows(const std::filesystem::path& out) {
  mywear::pipeline::PipelineConfig cfg;
  cfg.ecg_window_ms = 20000;
  cfg.ecg_schedule_ms = 30000;
  cfg.output_dir = out.string();
  cfg.alert_retry_backoff_ms = 1;
  return cfg;
}

inline void write_series(const std::filesystem::path& path, const mywear::SampleSeries& s) {
  mywear::csv::TimedColumn col;
  for (std::size_t i = 0; i < s.size(); ++i) {
    col.t_ms.push_back(s.time_of(i));
    col.values.push_back(s.values()[i]);
  }
  mywear::csv::write_channel(path, col);
}

struct RecordingFiles {
  std::filesystem::path ecg, imu, emg_bicep, emg_chest, temperature;
};

// A recording with every channel: ECG with jitter, an IMU trace with a fall
// and a forward bend, two EMG channels with bursts and a temperature track.
inline RecordingFiles write_recording(const std::filesystem::path& dir, std::uint64_t seed, double seconds = 75.0) {
  using namespace mywear;
  RecordingFiles f{dir / "ecg.csv", dir / "imu.csv", dir / "emg_bicep.csv", dir / "emg_chest.csv",
                   dir / "temperature.csv"};
  synth::EcgConfig ec;
  ec.duration_s = seconds;
  ec.rr_jitter_ms = 35;
  ec.noise_mv = 0.02;
  ec.seed = seed;
  ec.mean_rr_ms = 760 + 40.0 * static_cast<double>(seed % 5);
  write_series(f.ecg, synth::ecg(ec).series);

  synth::ImuConfig ic;
  ic.duration_s = 30;
  ic.falls_at_s = {12.0 + static_cast<double>(seed % 3)};
  ic.bend_at_s = 22.0;
  ic.seed = seed;
  csv::write_imu(f.imu, synth::imu(ic));

  synth::EmgConfig mc;
  mc.duration_s = 12;
  mc.seed = seed;
  mc.bursts = {{2.0, 0.6, 0.4}, {6.0, 0.6, 0.9}};
  write_series(f.emg_bicep, synth::emg(mc));
  mc.channel = Channel::EmgChest;
  mc.seed = seed + 100;
  mc.bursts = {{4.0, 0.5, 0.2}};
  write_series(f.emg_chest, synth::emg(mc));

  std::vector<double> temp;
  for (int i = 0; i < 60; ++i) temp.push_back(36.5 + 0.01 * i);
  write_series(f.temperature, make_sample_series(Channel::Temperature, 1.0, 0, temp));
  return f;
}

}  // namespace fixtures
