#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <nlohmann/json.hpp>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mywear/telemetry.hpp"

namespace mywear::pipeline {

enum class AlertKind { AbnormalBeat, PotentialHeartFailure, FallDetected, NoSignal };
std::string_view to_string(AlertKind kind) noexcept;

struct Alert {
  std::int64_t t_ms = 0;
  telemetry::DeviceId device_id;
  AlertKind kind = AlertKind::AbnormalBeat;
  std::string detail;
  std::string delivery_status = "pending";
};

nlohmann::json to_json(const Alert& alert);
/// Orders by time, then kind, then detail.
bool alert_before(const Alert& a, const Alert& b);

/// Classification outcome of one ECG window, as seen by the alert rule.
struct WindowSummary {
  std::int64_t t_ms = 0;
  bool classified = false;
  std::size_t total_beats = 0;
  std::size_t abnormal_beats = 0;
  std::string dominant_abnormal;  // most frequent abnormal class label, if any
};

struct RuleConfig {
  std::size_t consecutive_abnormal = 2;
  std::size_t abnormal_beats_threshold = 1;
};

/// A window is abnormal when it holds at least abnormal_beats_threshold
/// non-N beats; each abnormal window raises AbnormalBeat. The
/// consecutive_abnormal-th abnormal window in a row also raises
/// PotentialHeartFailure and resets the run. Unclassified windows break a run.
class AbnormalityRule {
 public:
  AbnormalityRule(RuleConfig cfg, telemetry::DeviceId device) : cfg_(cfg), device_(device) {}
  std::vector<Alert> observe(const WindowSummary& window);

 private:
  RuleConfig cfg_;
  telemetry::DeviceId device_;
  std::size_t run_ = 0;
};

std::vector<Alert> abnormality_rule(std::span<const WindowSummary> windows, const RuleConfig& cfg,
                                    telemetry::DeviceId device);

/// Delivery target for alerts. deliver() throws Error(SinkUnavailable) on failure.
class AlertSink {
 public:
  virtual ~AlertSink() = default;
  virtual std::string name() const = 0;
  virtual void deliver(const Alert& alert) = 0;
};

/// One JSON object per line.
class StreamSink final : public AlertSink {
 public:
  explicit StreamSink(std::ostream& out, std::string name = "stdout") : out_(out), name_(std::move(name)) {}
  std::string name() const override { return name_; }
  void deliver(const Alert& alert) override;

 private:
  std::mutex mu_;
  std::ostream& out_;
  std::string name_;
};

/// Append-only JSON-lines log; single writer guarded by a mutex.
class FileSink final : public AlertSink {
 public:
  explicit FileSink(std::filesystem::path path);
  std::string name() const override { return "file:" + path_.string(); }
  void deliver(const Alert& alert) override;

 private:
  std::mutex mu_;
  std::filesystem::path path_;
};

/// HTTP POST of the alert JSON to an http:// URL. Non-2xx or transport
/// errors count as failures.
class WebhookSink final : public AlertSink {
 public:
  explicit WebhookSink(std::string url, int timeout_ms = 2000);
  std::string name() const override { return "webhook:" + url_; }
  void deliver(const Alert& alert) override;

 private:
  std::string url_;
  std::string origin_;
  std::string path_;
  int timeout_ms_;
};

struct RetryPolicy {
  std::size_t attempts = 3;
  std::int64_t initial_backoff_ms = 100;
  std::int64_t max_backoff_ms = 1000;
};

struct DeliveryRecord {
  std::string sink;
  bool delivered = false;
  std::size_t attempts = 0;
  std::string error;
};

/// At-least-once delivery to every sink, retrying each up to policy.attempts
/// times with doubling backoff capped at max_backoff_ms. Never throws for a
/// failing sink; sets alert.delivery_status to "delivered", "partial",
/// "failed" or "no_sinks".
std::vector<DeliveryRecord> dispatch_alert(Alert& alert, std::span<AlertSink* const> sinks,
                                           const RetryPolicy& policy = {});

}  // namespace mywear::pipeline
