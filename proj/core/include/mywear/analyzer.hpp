#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mywear/alerts.hpp"
#include "mywear/beat_classifier.hpp"
#include "mywear/config.hpp"
#include "mywear/motion.hpp"
#include "mywear/signal.hpp"
#include "mywear/telemetry.hpp"

namespace mywear::pipeline {

inline constexpr int kReportSchemaVersion = 1;

/// Plot series emitted next to a report, one CSV each.
struct PlotSeries {
  std::string name;                 // file stem, e.g. "ecg_window_0"
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

/// Incremental analysis of one device stream. Samples may arrive in any
/// chunking and with channels interleaved; the result depends only on the
/// per-channel sample sequences. Not thread-safe; one instance per stream.
///
/// ECG is cut into windows of ecg_window_ms starting every ecg_schedule_ms
/// from the first ECG sample. A window is analysed as soon as it holds
/// window * rate samples; a window still short at finish() is reported as
/// incomplete. Accelerometer axes are paired by arrival index.
class StreamAnalyzer {
 public:
  StreamAnalyzer(PipelineConfig cfg, telemetry::DeviceId device,
                 std::shared_ptr<const beats::BeatPredictor> model = nullptr);

  /// Throws NonMonotonicTime if a channel's timestamps go backwards.
  void push(Channel channel, std::span<const TimedSample> samples);

  /// Closes the stream and returns the report (no generation timestamp; the
  /// caller adds one). Alerts inside have delivery_status "pending".
  nlohmann::json finish();

  /// Alerts raised so far, in the order raised.
  const std::vector<Alert>& alerts() const noexcept { return alerts_; }
  /// Alerts raised since the previous call.
  std::vector<Alert> drain_alerts();
  const std::vector<PlotSeries>& plots() const noexcept { return plots_; }

 private:
  void push_ecg(const TimedSample& s);
  void close_ecg_window(bool complete);
  void push_accel(Channel axis, const TimedSample& s);
  nlohmann::json finish_motion();
  nlohmann::json finish_emg(Channel channel, const std::vector<TimedSample>& samples);
  nlohmann::json finish_temperature() const;

  PipelineConfig cfg_;
  telemetry::DeviceId device_;
  std::shared_ptr<const beats::BeatPredictor> model_;
  AbnormalityRule rule_;

  std::optional<std::int64_t> ecg_origin_;
  std::int64_t ecg_window_index_ = -1;
  std::vector<TimedSample> ecg_buffer_;
  bool ecg_window_done_ = false;
  std::size_t ecg_window_samples_;
  nlohmann::json ecg_windows_ = nlohmann::json::array();

  std::array<std::vector<TimedSample>, 3> accel_;
  std::size_t accel_paired_ = 0;
  std::vector<ImuSample> imu_;
  motion::FallDetector fall_detector_;
  nlohmann::json fall_events_ = nlohmann::json::array();

  std::vector<TimedSample> emg_bicep_, emg_chest_, temperature_;
  std::array<std::optional<std::int64_t>, 7> last_t_{};

  std::vector<Alert> alerts_;
  std::size_t drained_ = 0;
  std::vector<PlotSeries> plots_;
  bool finished_ = false;
};

/// Dispatches alerts as they are drained and writes each delivery status back
/// into the finished report, whose alerts are sorted by alert_before.
class AlertDispatcher {
 public:
  AlertDispatcher(std::span<AlertSink* const> sinks, RetryPolicy policy) : sinks_(sinks.begin(), sinks.end()), policy_(policy) {}
  void dispatch(std::vector<Alert> alerts);
  void annotate(nlohmann::json& report) const;

 private:
  std::vector<AlertSink*> sinks_;
  RetryPolicy policy_;
  std::vector<Alert> sent_;
};

/// Report bundle on disk: <dir>/report.json plus <dir>/plots/<name>.csv.
void write_bundle(const std::filesystem::path& dir, const nlohmann::json& report,
                  std::span<const PlotSeries> plots, const std::string& report_name = "report.json");

/// Report with volatile fields (generation time, delivery status) removed,
/// for comparing two runs over the same data.
nlohmann::json analysis_view(nlohmann::json report);

std::int64_t now_ms();

struct ReplayInputs {
  std::optional<std::filesystem::path> ecg;
  std::optional<std::filesystem::path> imu;
  std::optional<std::filesystem::path> emg_bicep;
  std::optional<std::filesystem::path> emg_chest;
  std::optional<std::filesystem::path> temperature;
};

/// Per-channel wire-precision samples read from CSV inputs.
std::vector<std::pair<Channel, std::vector<TimedSample>>> load_replay_samples(const ReplayInputs& inputs);

/// Builds the alert sinks named by the config: per-device JSON-lines log under
/// output_dir, stdout when alert_stdout, webhook when webhook_url is set.
std::vector<std::unique_ptr<AlertSink>> make_sinks(const PipelineConfig& cfg, telemetry::DeviceId device);

RetryPolicy retry_policy(const PipelineConfig& cfg);

struct ReplayResult {
  nlohmann::json report;
  std::filesystem::path bundle_dir;
};

/// Offline run of the whole analysis chain over recorded files. Dispatches
/// alerts to the configured sinks and writes the bundle to
/// <output_dir>/<device>/.
ReplayResult replay(const PipelineConfig& cfg, const ReplayInputs& inputs,
                    std::shared_ptr<const beats::BeatPredictor> model = nullptr);

/// Loads cfg.model_path if set.
std::shared_ptr<const beats::BeatPredictor> load_beat_model(const PipelineConfig& cfg);

}  // namespace mywear::pipeline
