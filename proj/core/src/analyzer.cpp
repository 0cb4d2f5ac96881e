#include "mywear/analyzer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>

#include "mywear/csv_io.hpp"
#include "mywear/emg.hpp"
#include "mywear/error.hpp"
#include "mywear/hrv.hpp"

namespace mywear::pipeline {
namespace {

motion::FallThresholds fall_thresholds(const PipelineConfig& cfg) {
  motion::FallThresholds th;
  th.low_g = cfg.fall_low_g;
  th.high_g = cfg.fall_high_g;
  th.recovery_ms = cfg.fall_recovery_ms;
  return th;
}

RuleConfig rule_config(const PipelineConfig& cfg) {
  return {static_cast<std::size_t>(cfg.consecutive_abnormal), static_cast<std::size_t>(cfg.abnormal_beats_per_window)};
}

std::vector<double> widen(std::span<const TimedSample> s) {
  std::vector<double> v;
  v.reserve(s.size());
  for (const auto& x : s) v.push_back(static_cast<double>(x.value));
  return v;
}

nlohmann::json event_json(const motion::FallEvent& e) {
  return {{"t_predicted_ms", e.t_predicted_ms}, {"t_detected_ms", e.t_detected_ms}, {"min_g", e.min_g},
          {"peak_g", e.peak_g}};
}

}  // namespace

std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

StreamAnalyzer::StreamAnalyzer(PipelineConfig cfg, telemetry::DeviceId device,
                               std::shared_ptr<const beats::BeatPredictor> model)
    : cfg_(std::move(cfg)),
      device_(device),
      model_(std::move(model)),
      rule_(rule_config(cfg_), device),
      fall_detector_(fall_thresholds(cfg_)) {
  cfg_.validate();
  ecg_window_samples_ = static_cast<std::size_t>(
      std::max<long long>(1, std::llround(static_cast<double>(cfg_.ecg_window_ms) * cfg_.ecg_rate_hz / 1000.0)));
}

void StreamAnalyzer::push(Channel channel, std::span<const TimedSample> samples) {
  if (finished_) throw Error(Errc::InvalidConfig, "analyzer already finished");
  auto& last = last_t_[static_cast<std::size_t>(channel)];
  for (const auto& s : samples) {
    if (last && s.t_ms <= *last) {
      throw Error(Errc::NonMonotonicTime, std::string(to_string(channel)) + " timestamp " + std::to_string(s.t_ms) +
                                              " after " + std::to_string(*last));
    }
    last = s.t_ms;
    switch (channel) {
      case Channel::Ecg: push_ecg(s); break;
      case Channel::EmgBicep: emg_bicep_.push_back(s); break;
      case Channel::EmgChest: emg_chest_.push_back(s); break;
      case Channel::Temperature: temperature_.push_back(s); break;
      case Channel::AccelX:
      case Channel::AccelY:
      case Channel::AccelZ: push_accel(channel, s); break;
    }
  }
}

void StreamAnalyzer::push_ecg(const TimedSample& s) {
  if (!ecg_origin_) ecg_origin_ = s.t_ms;
  const std::int64_t offset = s.t_ms - *ecg_origin_;
  const std::int64_t k = offset / cfg_.ecg_schedule_ms;
  const bool inside = offset % cfg_.ecg_schedule_ms < cfg_.ecg_window_ms;
  if (k != ecg_window_index_) {
    if (!ecg_buffer_.empty() && !ecg_window_done_) close_ecg_window(false);
    ecg_window_index_ = k;
    ecg_window_done_ = false;
    ecg_buffer_.clear();
  }
  if (!inside || ecg_window_done_) return;
  ecg_buffer_.push_back(s);
  if (ecg_buffer_.size() == ecg_window_samples_) close_ecg_window(true);
}

void StreamAnalyzer::close_ecg_window(bool complete) {
  const std::int64_t start = *ecg_origin_ + ecg_window_index_ * cfg_.ecg_schedule_ms;
  nlohmann::json w{{"window_index", ecg_window_index_},
                   {"t_start_ms", start},
                   {"t_first_ms", ecg_buffer_.front().t_ms},
                   {"t_last_ms", ecg_buffer_.back().t_ms},
                   {"samples", ecg_buffer_.size()}};
  const std::string suffix = std::to_string(ecg_window_index_);

  auto finalize = [&] {
    ecg_windows_.push_back(std::move(w));
    ecg_window_done_ = true;
  };

  if (!complete) {
    w["status"] = "incomplete";
    finalize();
    return;
  }

  const auto series = make_sample_series(Channel::Ecg, cfg_.ecg_rate_hz, ecg_buffer_.front().t_ms, widen(ecg_buffer_));
  std::vector<std::size_t> peaks;
  try {
    peaks = hrv::detect_r_peaks(series);
  } catch (const Error& e) {
    if (e.code() != Errc::NoPeaksFound && e.code() != Errc::SignalTooShort) throw;
    w["status"] = "no_signal";
    w["error"] = std::string(to_string(e.code()));
    alerts_.push_back({series.t0_ms(), device_, AlertKind::NoSignal,
                       "no heartbeat detected; check whether the electrodes are in contact"});
    rule_.observe({series.t0_ms(), false, 0, 0, {}});
    finalize();
    return;
  }

  if (cfg_.write_plots) {
    PlotSeries p{"ecg_window_" + suffix, {"t_ms", "value", "is_peak"}, {}};
    std::size_t next_peak = 0;
    for (std::size_t i = 0; i < series.size(); ++i) {
      const bool is_peak = next_peak < peaks.size() && peaks[next_peak] == i;
      if (is_peak) ++next_peak;
      p.rows.push_back({static_cast<double>(ecg_buffer_[i].t_ms), series.values()[i], is_peak ? 1.0 : 0.0});
    }
    plots_.push_back(std::move(p));
  }

  w["status"] = "ok";
  w["peaks"] = peaks.size();
  if (peaks.size() >= 2) {
    const auto rr = hrv::rr_series(peaks, cfg_.ecg_rate_hz);
    w["rr_intervals"] = rr.intervals_ms.size();
    w["rr_flagged"] = rr.flagged_count();
    try {
      const auto m = hrv::time_domain_metrics(rr, cfg_.hrv_xx_ms);
      w["hrv"] = {{"mean_rr_ms", m.mean_rr_ms}, {"sdnn_ms", m.sdnn_ms},         {"rmssd_ms", m.rmssd_ms},
                  {"mean_hr_bpm", m.mean_hr_bpm}, {"std_hr_bpm", m.std_hr_bpm}, {"min_hr_bpm", m.min_hr_bpm},
                  {"max_hr_bpm", m.max_hr_bpm}, {"nnxx_count", m.nnxx_count},   {"pnnxx_pct", m.pnnxx_pct},
                  {"xx_ms", m.xx_ms}};
      const auto stress = hrv::stress_level(m.rmssd_ms);
      w["stress"] = {{"hrv_score", stress.hrv_score}, {"level", std::string(hrv::to_string(stress.level))}};
      if (m.sdnn_ms == 0.0) w["stress"]["caveat"] = "constant_rr";
    } catch (const Error& e) {
      if (e.code() != Errc::TooFewIntervals) throw;
      w["status"] = "insufficient_rr";
    }
    try {
      const auto pc = hrv::poincare(rr);
      w["poincare"] = {{"sd1_ms", pc.sd1_ms}, {"sd2_ms", pc.sd2_ms}, {"points", pc.points.size()}};
      if (cfg_.write_plots) {
        PlotSeries p{"poincare_" + suffix, {"rr_i_ms", "rr_next_ms"}, {}};
        for (const auto& [a, b] : pc.points) p.rows.push_back({a, b});
        plots_.push_back(std::move(p));
      }
    } catch (const Error& e) {
      if (e.code() != Errc::TooFewIntervals) throw;
    }
  } else {
    w["status"] = "insufficient_rr";
  }

  if (model_) {
    const auto cls = beats::classify_stream(*model_, series, peaks);
    std::array<std::size_t, kBeatClassCount> counts{};
    for (const auto& b : cls.beats) ++counts[static_cast<std::size_t>(b.label)];
    nlohmann::json cj;
    for (std::size_t c = 0; c < kBeatClassCount; ++c) cj[std::string(to_string(static_cast<BeatClass>(c)))] = counts[c];
    const std::size_t abnormal = cls.beats.size() - counts[0];
    std::size_t dominant = 0;
    for (std::size_t c = 1; c < kBeatClassCount; ++c) {
      if (counts[c] > 0 && (dominant == 0 || counts[c] > counts[dominant])) dominant = c;
    }
    w["classification"] = {{"beats", cls.beats.size()}, {"skipped", cls.skipped.size()},
                           {"counts", cj}, {"abnormal", abnormal}};
    WindowSummary summary{series.t0_ms(), true, cls.beats.size(), abnormal,
                          dominant ? std::string(to_string(static_cast<BeatClass>(dominant))) : std::string{}};
    w["abnormal"] = abnormal >= static_cast<std::size_t>(cfg_.abnormal_beats_per_window);
    for (auto& a : rule_.observe(summary)) alerts_.push_back(std::move(a));
    if (cfg_.write_plots) {
      PlotSeries p{"beats_" + suffix, {"t_ms", "class", "probability"}, {}};
      for (const auto& b : cls.beats) {
        p.rows.push_back({static_cast<double>(series.time_of(b.sample_index)), static_cast<double>(b.label),
                          b.probability});
      }
      plots_.push_back(std::move(p));
    }
  } else {
    w["classification"] = nullptr;
  }
  finalize();
}

void StreamAnalyzer::push_accel(Channel axis, const TimedSample& s) {
  accel_[static_cast<std::size_t>(axis) - static_cast<std::size_t>(Channel::AccelX)].push_back(s);
  while (accel_[0].size() > accel_paired_ && accel_[1].size() > accel_paired_ && accel_[2].size() > accel_paired_) {
    const std::size_t i = accel_paired_++;
    ImuSample imu{accel_[0][i].t_ms, accel_[0][i].value, accel_[1][i].value, accel_[2][i].value};
    imu_.push_back(imu);
    if (auto e = fall_detector_.push(imu.t_ms, motion::resultant_acceleration(imu))) {
      fall_events_.push_back(event_json(*e));
      alerts_.push_back({e->t_detected_ms, device_, AlertKind::FallDetected,
                         "min " + std::to_string(e->min_g) + " g, peak " + std::to_string(e->peak_g) + " g"});
    }
  }
}

nlohmann::json StreamAnalyzer::finish_motion() {
  if (imu_.empty()) return {{"status", "skipped"}, {"reason", "no IMU samples"}};
  if (auto e = fall_detector_.flush()) {
    fall_events_.push_back(event_json(*e));
    alerts_.push_back({e->t_detected_ms, device_, AlertKind::FallDetected,
                       "min " + std::to_string(e->min_g) + " g, peak " + std::to_string(e->peak_g) + " g"});
  }
  nlohmann::json out{{"status", "ok"}, {"samples", imu_.size()}, {"fall_events", fall_events_}};

  std::optional<motion::ImuCalibration> cal;
  std::vector<ImuSample> still;
  for (const auto& s : imu_) {
    if (s.t_ms - imu_.front().t_ms > 1000) break;
    still.push_back(s);
  }
  try {
    cal = motion::calibrate(still);
    out["calibration"] = {{"offset_x", cal->offset_x}, {"offset_y", cal->offset_y}, {"offset_z", cal->offset_z}};
  } catch (const Error& e) {
    if (e.code() != Errc::NotStill && e.code() != Errc::SignalTooShort) throw;
    out["orientation"] = {{"status", "uncalibrated"}, {"reason", std::string(to_string(e.code()))}};
  }

  PlotSeries plot{"imu", {"t_ms", "g", "roll_deg", "pitch_deg", "label"}, {}};
  std::map<std::string, std::size_t> label_counts;
  auto last_label = motion::OrientationLabel::Unknown;
  for (const auto& s : imu_) {
    const double g = motion::resultant_acceleration(s);
    double roll = std::nan(""), pitch = std::nan("");
    auto label = motion::OrientationLabel::Unknown;
    if (cal) {
      try {
        const auto o = motion::euler_angles(s, *cal);
        roll = o.roll_deg;
        pitch = o.pitch_deg;
        label = motion::orientation_label(roll, pitch, cfg_.orientation_bend_deg);
      } catch (const Error& e) {
        if (e.code() != Errc::ZeroVector) throw;
      }
      ++label_counts[std::string(motion::to_string(label))];
      last_label = label;
    }
    if (cfg_.write_plots) plot.rows.push_back({static_cast<double>(s.t_ms), g, roll, pitch, static_cast<double>(label)});
  }
  if (cal) {
    out["orientation"] = {{"status", "ok"},
                          {"label_counts", label_counts},
                          {"final_label", std::string(motion::to_string(last_label))}};
  }
  if (cfg_.write_plots) plots_.push_back(std::move(plot));
  return out;
}

nlohmann::json StreamAnalyzer::finish_emg(Channel channel, const std::vector<TimedSample>& samples) {
  if (samples.empty()) return nullptr;
  const auto raw = make_sample_series(channel, cfg_.emg_rate_hz, samples.front().t_ms, widen(samples));
  emg::ActivityConfig ac;
  ac.rest_ms = cfg_.emg_rest_ms;
  ac.calibration_max = cfg_.emg_calibration_max_mv;
  ac.peaks.k_sigma = cfg_.emg_k_sigma;
  const auto act = emg::analyze_muscle(raw, ac);
  nlohmann::json peaks = nlohmann::json::array();
  double top = 0.0;
  for (const auto& p : act.peaks) {
    peaks.push_back({{"t_ms", p.t_ms}, {"amplitude_mv", p.amplitude}});
    top = std::max(top, p.amplitude);
  }
  if (cfg_.write_plots) {
    PlotSeries p{std::string(to_string(channel)) + "_envelope", {"t_ms", "raw_mv", "envelope_mv"}, {}};
    for (std::size_t i = 0; i < raw.size(); ++i) {
      p.rows.push_back({static_cast<double>(samples[i].t_ms), raw.values()[i], act.envelope.values()[i]});
    }
    plots_.push_back(std::move(p));
  }
  return {{"samples", raw.size()},
          {"rest_baseline", {{"mean_mv", act.baseline.mean}, {"sigma_mv", act.baseline.sigma}}},
          {"peaks", peaks},
          {"max_peak_mv", top},
          {"intensity", std::string(emg::to_string(act.intensity))}};
}

nlohmann::json StreamAnalyzer::finish_temperature() const {
  if (temperature_.empty()) return nullptr;
  double sum = 0.0, lo = temperature_.front().value, hi = lo;
  for (const auto& s : temperature_) {
    sum += s.value;
    lo = std::min(lo, static_cast<double>(s.value));
    hi = std::max(hi, static_cast<double>(s.value));
  }
  return {{"samples", temperature_.size()},
          {"mean_c", sum / static_cast<double>(temperature_.size())},
          {"min_c", lo},
          {"max_c", hi}};
}

nlohmann::json StreamAnalyzer::finish() {
  if (finished_) throw Error(Errc::InvalidConfig, "analyzer already finished");
  if (!ecg_buffer_.empty() && !ecg_window_done_) close_ecg_window(false);
  finished_ = true;

  nlohmann::json report;
  report["schema_version"] = kReportSchemaVersion;
  report["device_id"] = device_.hex();
  report["config_hash"] = cfg_.hash();
  report["model_hash"] = model_ ? nlohmann::json(model_->model_hash()) : nlohmann::json(nullptr);

  nlohmann::json notes = nlohmann::json::array();
  report["ecg"] = {{"rate_hz", cfg_.ecg_rate_hz},
                   {"window_ms", cfg_.ecg_window_ms},
                   {"schedule_ms", cfg_.ecg_schedule_ms},
                   {"windows", ecg_windows_}};
  if (ecg_windows_.empty()) notes.push_back("no ECG samples; heart analysis skipped");
  if (!model_) notes.push_back("no beat model configured; beat classification skipped");

  report["motion"] = finish_motion();
  if (imu_.empty()) notes.push_back("no IMU samples; fall and orientation stages skipped");
  report["emg"] = {{"bicep", finish_emg(Channel::EmgBicep, emg_bicep_)},
                   {"chest", finish_emg(Channel::EmgChest, emg_chest_)}};
  report["temperature"] = finish_temperature();

  auto sorted = alerts_;
  std::stable_sort(sorted.begin(), sorted.end(), alert_before);
  nlohmann::json alerts = nlohmann::json::array();
  for (const auto& a : sorted) alerts.push_back(to_json(a));
  report["alerts"] = alerts;
  report["notes"] = notes;
  return report;
}

std::vector<Alert> StreamAnalyzer::drain_alerts() {
  std::vector<Alert> out(alerts_.begin() + static_cast<std::ptrdiff_t>(drained_), alerts_.end());
  drained_ = alerts_.size();
  return out;
}

void AlertDispatcher::dispatch(std::vector<Alert> alerts) {
  for (auto& a : alerts) {
    dispatch_alert(a, sinks_, policy_);
    sent_.push_back(std::move(a));
  }
}

void AlertDispatcher::annotate(nlohmann::json& report) const {
  auto sorted = sent_;
  std::stable_sort(sorted.begin(), sorted.end(), alert_before);
  auto& alerts = report.at("alerts");
  if (alerts.size() != sorted.size()) {
    throw Error(Errc::InvalidConfig, "dispatched " + std::to_string(sorted.size()) + " alerts, report holds " +
                                         std::to_string(alerts.size()));
  }
  for (std::size_t i = 0; i < sorted.size(); ++i) alerts[i]["delivery_status"] = sorted[i].delivery_status;
}

void write_bundle(const std::filesystem::path& dir, const nlohmann::json& report, std::span<const PlotSeries> plots,
                  const std::string& report_name) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / report_name);
    if (!out) throw Error(Errc::Io, "cannot write " + (dir / report_name).string());
    out << report.dump(2) << '\n';
  }
  if (plots.empty()) return;
  const auto plot_dir = dir / "plots";
  std::filesystem::create_directories(plot_dir);
  for (const auto& p : plots) {
    std::ofstream out(plot_dir / (p.name + ".csv"));
    if (!out) throw Error(Errc::Io, "cannot write plot " + p.name);
    out << std::setprecision(10);
    for (std::size_t c = 0; c < p.columns.size(); ++c) out << (c ? "," : "") << p.columns[c];
    out << '\n';
    for (const auto& row : p.rows) {
      for (std::size_t c = 0; c < row.size(); ++c) {
        if (c) out << ',';
        if (std::isfinite(row[c])) out << row[c];
      }
      out << '\n';
    }
  }
}

nlohmann::json analysis_view(nlohmann::json report) {
  report.erase("generated_at_ms");
  if (report.contains("alerts")) {
    for (auto& a : report["alerts"]) a.erase("delivery_status");
  }
  return report;
}

std::vector<std::pair<Channel, std::vector<TimedSample>>> load_replay_samples(const ReplayInputs& inputs) {
  std::vector<std::pair<Channel, std::vector<TimedSample>>> out;
  auto channel_file = [&](const std::optional<std::filesystem::path>& p, Channel c) {
    if (!p) return;
    const auto col = csv::read_channel(*p);
    std::vector<TimedSample> v;
    v.reserve(col.values.size());
    for (std::size_t i = 0; i < col.values.size(); ++i) v.push_back({col.t_ms[i], static_cast<float>(col.values[i])});
    out.emplace_back(c, std::move(v));
  };
  channel_file(inputs.ecg, Channel::Ecg);
  if (inputs.imu) {
    const auto imu = csv::read_imu(*inputs.imu);
    std::vector<TimedSample> x, y, z;
    for (const auto& s : imu) {
      x.push_back({s.t_ms, static_cast<float>(s.ax)});
      y.push_back({s.t_ms, static_cast<float>(s.ay)});
      z.push_back({s.t_ms, static_cast<float>(s.az)});
    }
    out.emplace_back(Channel::AccelX, std::move(x));
    out.emplace_back(Channel::AccelY, std::move(y));
    out.emplace_back(Channel::AccelZ, std::move(z));
  }
  channel_file(inputs.emg_bicep, Channel::EmgBicep);
  channel_file(inputs.emg_chest, Channel::EmgChest);
  channel_file(inputs.temperature, Channel::Temperature);
  return out;
}

std::vector<std::unique_ptr<AlertSink>> make_sinks(const PipelineConfig& cfg, telemetry::DeviceId device) {
  std::vector<std::unique_ptr<AlertSink>> sinks;
  const auto dir = std::filesystem::path(cfg.output_dir) / device.hex();
  std::filesystem::create_directories(dir);
  sinks.push_back(std::make_unique<FileSink>(dir / "alerts.jsonl"));
  if (cfg.alert_stdout) sinks.push_back(std::make_unique<StreamSink>(std::cout));
  if (!cfg.webhook_url.empty()) sinks.push_back(std::make_unique<WebhookSink>(cfg.webhook_url));
  return sinks;
}

RetryPolicy retry_policy(const PipelineConfig& cfg) {
  RetryPolicy policy;
  policy.initial_backoff_ms = cfg.alert_retry_backoff_ms;
  policy.max_backoff_ms = std::max<std::int64_t>(policy.max_backoff_ms, cfg.alert_retry_backoff_ms);
  return policy;
}

std::shared_ptr<const beats::BeatPredictor> load_beat_model(const PipelineConfig& cfg) {
  if (cfg.model_path.empty()) return nullptr;
  return std::make_shared<beats::NetworkPredictor>(nn::load(cfg.model_path));
}

ReplayResult replay(const PipelineConfig& cfg, const ReplayInputs& inputs,
                    std::shared_ptr<const beats::BeatPredictor> model) {
  const auto device = telemetry::DeviceId::from_hex(cfg.device_id);
  StreamAnalyzer analyzer(cfg, device, std::move(model));
  for (const auto& [channel, samples] : load_replay_samples(inputs)) analyzer.push(channel, samples);
  auto report = analyzer.finish();

  auto sinks = make_sinks(cfg, device);
  std::vector<AlertSink*> raw;
  for (auto& s : sinks) raw.push_back(s.get());
  AlertDispatcher dispatcher(raw, retry_policy(cfg));
  dispatcher.dispatch(analyzer.drain_alerts());
  dispatcher.annotate(report);
  report["generated_at_ms"] = now_ms();

  const auto dir = std::filesystem::path(cfg.output_dir) / device.hex();
  write_bundle(dir, report, cfg.write_plots ? analyzer.plots() : std::span<const PlotSeries>{});
  return {std::move(report), dir};
}

}  // namespace mywear::pipeline
