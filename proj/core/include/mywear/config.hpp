#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

namespace mywear::pipeline {

/// Pipeline settings. Loaded from a `key = value` text file; `#` starts a
/// comment, unknown keys are rejected. Keys match the member names.
struct PipelineConfig {
  std::string device_id = "0000000000000001";

  double ecg_rate_hz = 250.0;
  double emg_rate_hz = 1000.0;
  double imu_rate_hz = 50.0;

  std::int64_t ecg_window_ms = 4 * 60 * 1000;
  std::int64_t ecg_schedule_ms = 20 * 60 * 1000;
  double hrv_xx_ms = 50.0;

  double fall_low_g = 0.90;
  double fall_high_g = 1.0;
  std::int64_t fall_recovery_ms = 300;
  double orientation_bend_deg = 20.0;

  std::int64_t consecutive_abnormal = 2;
  std::int64_t abnormal_beats_per_window = 1;

  double emg_calibration_max_mv = 1.0;
  double emg_rest_ms = 1000.0;
  double emg_k_sigma = 3.0;

  std::string model_path;
  std::string keys_path = "keys.json";
  std::string listen_address = "127.0.0.1:7070";
  std::string webhook_url;
  std::string output_dir = "out";
  bool alert_stdout = false;
  bool write_plots = true;
  std::int64_t alert_retry_backoff_ms = 100;

  std::uint64_t seed = 1;

  /// Throws InvalidConfig when a threshold is non-positive or the schedule is
  /// shorter than the window.
  void validate() const;

  /// Canonical `key = value` dump, one line per key in declaration order.
  std::string dump() const;
  /// SHA-256 of the analysis-relevant keys (addresses and paths excluded).
  std::string hash() const;

  /// Applies one `key = value` assignment. Throws InvalidConfig.
  void set(const std::string& key, const std::string& value);

  static PipelineConfig load(const std::filesystem::path& path);
};

}  // namespace mywear::pipeline
