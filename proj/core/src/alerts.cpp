#include "mywear/alerts.hpp"

#include <httplib.h>

#include <algorithm>
#include <map>
#include <thread>
#include <tuple>

#include "mywear/error.hpp"

namespace mywear::pipeline {

std::string_view to_string(AlertKind kind) noexcept {
  switch (kind) {
    case AlertKind::AbnormalBeat: return "AbnormalBeat";
    case AlertKind::PotentialHeartFailure: return "PotentialHeartFailure";
    case AlertKind::FallDetected: return "FallDetected";
    case AlertKind::NoSignal: return "NoSignal";
  }
  return "Unknown";
}

nlohmann::json to_json(const Alert& a) {
  return {{"t_ms", a.t_ms},
          {"device_id", a.device_id.hex()},
          {"kind", std::string(to_string(a.kind))},
          {"detail", a.detail},
          {"delivery_status", a.delivery_status}};
}

bool alert_before(const Alert& a, const Alert& b) {
  return std::tie(a.t_ms, a.kind, a.detail) < std::tie(b.t_ms, b.kind, b.detail);
}

std::vector<Alert> AbnormalityRule::observe(const WindowSummary& w) {
  std::vector<Alert> out;
  const bool abnormal = w.classified && w.abnormal_beats >= cfg_.abnormal_beats_threshold;
  if (!abnormal) {
    run_ = 0;
    return out;
  }
  out.push_back({w.t_ms, device_, AlertKind::AbnormalBeat,
                 std::to_string(w.abnormal_beats) + "/" + std::to_string(w.total_beats) + " abnormal beats" +
                     (w.dominant_abnormal.empty() ? "" : ", mostly " + w.dominant_abnormal)});
  if (++run_ >= cfg_.consecutive_abnormal) {
    out.push_back({w.t_ms, device_, AlertKind::PotentialHeartFailure,
                   std::to_string(run_) + " consecutive abnormal windows"});
    run_ = 0;
  }
  return out;
}

std::vector<Alert> abnormality_rule(std::span<const WindowSummary> windows, const RuleConfig& cfg,
                                    telemetry::DeviceId device) {
  AbnormalityRule rule(cfg, device);
  std::vector<Alert> out;
  for (const auto& w : windows) {
    auto a = rule.observe(w);
    out.insert(out.end(), a.begin(), a.end());
  }
  return out;
}

void StreamSink::deliver(const Alert& alert) {
  std::lock_guard lock(mu_);
  out_ << to_json(alert).dump() << '\n';
  out_.flush();
  if (!out_) throw Error(Errc::SinkUnavailable, name_ + " stream is in a failed state");
}

FileSink::FileSink(std::filesystem::path path) : path_(std::move(path)) {}

void FileSink::deliver(const Alert& alert) {
  std::lock_guard lock(mu_);
  std::ofstream out(path_, std::ios::app);
  if (!out) throw Error(Errc::SinkUnavailable, "cannot append to " + path_.string());
  out << to_json(alert).dump() << '\n';
  if (!out) throw Error(Errc::SinkUnavailable, "write to " + path_.string() + " failed");
}

WebhookSink::WebhookSink(std::string url, int timeout_ms) : url_(std::move(url)), timeout_ms_(timeout_ms) {
  constexpr std::string_view scheme = "http://";
  if (url_.rfind(scheme, 0) != 0) throw Error(Errc::InvalidConfig, "webhook URL must start with http://");
  const auto slash = url_.find('/', scheme.size());
  origin_ = slash == std::string::npos ? url_ : url_.substr(0, slash);
  path_ = slash == std::string::npos ? "/" : url_.substr(slash);
}

void WebhookSink::deliver(const Alert& alert) {
  httplib::Client client(origin_);
  const auto secs = timeout_ms_ / 1000;
  const auto usecs = (timeout_ms_ % 1000) * 1000;
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  const auto res = client.Post(path_, to_json(alert).dump(), "application/json");
  if (!res) throw Error(Errc::SinkUnavailable, name() + ": " + httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300) {
    throw Error(Errc::SinkUnavailable, name() + ": HTTP " + std::to_string(res->status));
  }
}

std::vector<DeliveryRecord> dispatch_alert(Alert& alert, std::span<AlertSink* const> sinks, const RetryPolicy& policy) {
  std::vector<DeliveryRecord> records;
  std::size_t delivered = 0;
  for (AlertSink* sink : sinks) {
    DeliveryRecord rec;
    rec.sink = sink->name();
    std::int64_t backoff = policy.initial_backoff_ms;
    for (std::size_t attempt = 1; attempt <= std::max<std::size_t>(1, policy.attempts); ++attempt) {
      rec.attempts = attempt;
      try {
        sink->deliver(alert);
        rec.delivered = true;
        rec.error.clear();
        break;
      } catch (const std::exception& e) {
        rec.error = e.what();
      }
      if (attempt < policy.attempts && backoff > 0) {
        std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
        backoff = std::min(backoff * 2, policy.max_backoff_ms);
      }
    }
    delivered += rec.delivered ? 1 : 0;
    records.push_back(std::move(rec));
  }
  if (sinks.empty()) alert.delivery_status = "no_sinks";
  else if (delivered == sinks.size()) alert.delivery_status = "delivered";
  else if (delivered == 0) alert.delivery_status = "failed";
  else alert.delivery_status = "partial";
  return records;
}

}  // namespace mywear::pipeline
