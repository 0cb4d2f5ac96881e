#include "mywear/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <vector>

#include "mywear/digest.hpp"
#include "mywear/error.hpp"

namespace mywear::pipeline {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) {
    throw Error(Errc::InvalidConfig, key + ": '" + v + "' is not a number");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw Error(Errc::InvalidConfig, key + ": '" + v + "' is not a boolean");
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

struct Field {
  const char* name;
  bool hashed;
  std::function<void(PipelineConfig&, const std::string&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

#define MW_DOUBLE(name, hashed)                                                                      \
  Field{#name, hashed, [](PipelineConfig& c, const std::string& v) { c.name = parse_number<double>(#name, v); }, \
        [](const PipelineConfig& c) { return fmt(c.name); }}
#define MW_INT(name, hashed)                                                                                \
  Field{#name, hashed,                                                                                      \
        [](PipelineConfig& c, const std::string& v) { c.name = parse_number<decltype(c.name)>(#name, v); }, \
        [](const PipelineConfig& c) { return std::to_string(c.name); }}
#define MW_STRING(name, hashed)                                                      \
  Field{#name, hashed, [](PipelineConfig& c, const std::string& v) { c.name = v; }, \
        [](const PipelineConfig& c) { return c.name; }}
#define MW_BOOL(name, hashed)                                                                        \
  Field{#name, hashed, [](PipelineConfig& c, const std::string& v) { c.name = parse_bool(#name, v); }, \
        [](const PipelineConfig& c) { return std::string(c.name ? "true" : "false"); }}

const std::vector<Field>& fields() {
  static const std::vector<Field> f{
      MW_STRING(device_id, false),
      MW_DOUBLE(ecg_rate_hz, true),
      MW_DOUBLE(emg_rate_hz, true),
      MW_DOUBLE(imu_rate_hz, true),
      MW_INT(ecg_window_ms, true),
      MW_INT(ecg_schedule_ms, true),
      MW_DOUBLE(hrv_xx_ms, true),
      MW_DOUBLE(fall_low_g, true),
      MW_DOUBLE(fall_high_g, true),
      MW_INT(fall_recovery_ms, true),
      MW_DOUBLE(orientation_bend_deg, true),
      MW_INT(consecutive_abnormal, true),
      MW_INT(abnormal_beats_per_window, true),
      MW_DOUBLE(emg_calibration_max_mv, true),
      MW_DOUBLE(emg_rest_ms, true),
      MW_DOUBLE(emg_k_sigma, true),
      MW_STRING(model_path, false),
      MW_STRING(keys_path, false),
      MW_STRING(listen_address, false),
      MW_STRING(webhook_url, false),
      MW_STRING(output_dir, false),
      MW_BOOL(alert_stdout, false),
      MW_BOOL(write_plots, false),
      MW_INT(alert_retry_backoff_ms, false),
      MW_INT(seed, true),
  };
  return f;
}

#undef MW_DOUBLE
#undef MW_INT
#undef MW_STRING
#undef MW_BOOL

}  // namespace

void PipelineConfig::validate() const {
  auto positive = [](const char* name, double v) {
    if (!(v > 0.0)) throw Error(Errc::InvalidConfig, std::string(name) + " must be positive");
  };
  positive("ecg_rate_hz", ecg_rate_hz);
  positive("emg_rate_hz", emg_rate_hz);
  positive("imu_rate_hz", imu_rate_hz);
  positive("ecg_window_ms", static_cast<double>(ecg_window_ms));
  positive("ecg_schedule_ms", static_cast<double>(ecg_schedule_ms));
  positive("hrv_xx_ms", hrv_xx_ms);
  positive("fall_low_g", fall_low_g);
  positive("fall_high_g", fall_high_g);
  positive("fall_recovery_ms", static_cast<double>(fall_recovery_ms));
  positive("orientation_bend_deg", orientation_bend_deg);
  positive("consecutive_abnormal", static_cast<double>(consecutive_abnormal));
  positive("abnormal_beats_per_window", static_cast<double>(abnormal_beats_per_window));
  positive("emg_calibration_max_mv", emg_calibration_max_mv);
  positive("emg_rest_ms", emg_rest_ms);
  positive("emg_k_sigma", emg_k_sigma);
  if (ecg_schedule_ms < ecg_window_ms) {
    throw Error(Errc::InvalidConfig, "ecg_schedule_ms must be at least ecg_window_ms");
  }
  if (fall_low_g >= fall_high_g) throw Error(Errc::InvalidConfig, "fall_low_g must be below fall_high_g");
  if (alert_retry_backoff_ms < 0) throw Error(Errc::InvalidConfig, "alert_retry_backoff_ms must be >= 0");
}

std::string PipelineConfig::dump() const {
  std::string out;
  for (const auto& f : fields()) out += std::string(f.name) + " = " + f.get(*this) + "\n";
  return out;
}

std::string PipelineConfig::hash() const {
  std::string canon;
  for (const auto& f : fields()) {
    if (f.hashed) canon += std::string(f.name) + "=" + f.get(*this) + "\n";
  }
  return sha256_hex(canon);
}

void PipelineConfig::set(const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (key == f.name) {
      f.set(*this, value);
      return;
    }
  }
  throw Error(Errc::InvalidConfig, "unknown config key '" + key + "'");
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open config " + path.string());
  PipelineConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(Errc::InvalidConfig, path.string() + ":" + std::to_string(lineno) + " expected key = value");
    }
    cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  cfg.validate();
  return cfg;
}

}  // namespace mywear::pipeline
