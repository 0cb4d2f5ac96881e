#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>
#include <random>
#include <thread>

#include "mywear/analyzer.hpp"
#include "mywear/beat_classifier.hpp"
#include "mywear/csv_io.hpp"
#include "mywear/emg.hpp"
#include "mywear/error.hpp"
#include "mywear/hrv.hpp"
#include "mywear/motion.hpp"
#include "mywear/service.hpp"
#include "mywear/synthetic.hpp"
#include "mywear/telemetry.hpp"

using namespace mywear;
using nlohmann::json;

namespace {

std::atomic<bool> g_stop{false};

void print(const json& j) { std::cout << j.dump(2) << '\n'; }

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;

  pipeline::PipelineConfig load() const {
    auto cfg = config_path.empty() ? pipeline::PipelineConfig{} : pipeline::PipelineConfig::load(config_path);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw Error(Errc::InvalidConfig, "--set expects key=value, got " + kv);
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (seed) cfg.seed = *seed;
    cfg.validate();
    return cfg;
  }
};

struct Inputs {
  std::string ecg, imu, emg_bicep, emg_chest, temperature;

  void bind(CLI::App* cmd) {
    cmd->add_option("--ecg", ecg, "ECG CSV (t_ms,value in mV)");
    cmd->add_option("--imu", imu, "accelerometer CSV (t_ms,ax,ay,az in g)");
    cmd->add_option("--emg-bicep", emg_bicep, "bicep EMG CSV");
    cmd->add_option("--emg-chest", emg_chest, "chest EMG CSV");
    cmd->add_option("--temperature", temperature, "temperature CSV");
  }

  pipeline::ReplayInputs replay_inputs() const {
    auto opt = [](const std::string& s) -> std::optional<std::filesystem::path> {
      if (s.empty()) return std::nullopt;
      return s;
    };
    return {opt(ecg), opt(imu), opt(emg_bicep), opt(emg_chest), opt(temperature)};
  }
};

json eval_json(const beats::EvalReport& r) {
  json per_class = json::object();
  for (std::size_t c = 0; c < kBeatClassCount; ++c) {
    per_class[std::string(to_string(static_cast<BeatClass>(c)))] = {
        {"support", r.support[c]},
        {"precision_pct", r.class_precision_pct[c]},
        {"recall_pct", r.class_recall_pct[c]},
        {"accuracy_pct", r.class_accuracy_pct[c]}};
  }
  return {{"total", r.total},
          {"accuracy_pct", r.accuracy_pct},
          {"precision_pct", r.precision_pct},
          {"recall_pct", r.recall_pct},
          {"classes", per_class},
          {"confusion", r.confusion}};
}

std::vector<BeatSegment> beat_data(const std::string& path, std::size_t synthetic, std::uint64_t seed) {
  if (!path.empty()) return beats::load_mitbih_segments(path);
  return synth::beat_corpus(synthetic, seed);
}

json hrv_json(const SampleSeries& ecg, double xx_ms) {
  const auto peaks = hrv::detect_r_peaks(ecg);
  json out{{"peaks", peaks.size()}, {"peak_times_ms", json::array()}};
  for (auto p : peaks) out["peak_times_ms"].push_back(ecg.time_of(p));
  const auto rr = hrv::rr_series(peaks, ecg.rate_hz());
  out["rr_flagged"] = rr.flagged_count();
  const auto m = hrv::time_domain_metrics(rr, xx_ms);
  out["time_domain"] = {{"mean_rr_ms", m.mean_rr_ms}, {"sdnn_ms", m.sdnn_ms},       {"rmssd_ms", m.rmssd_ms},
                        {"mean_hr_bpm", m.mean_hr_bpm}, {"std_hr_bpm", m.std_hr_bpm}, {"min_hr_bpm", m.min_hr_bpm},
                        {"max_hr_bpm", m.max_hr_bpm}, {"nnxx", m.nnxx_count},         {"pnnxx_pct", m.pnnxx_pct},
                        {"xx_ms", m.xx_ms}};
  const auto pc = hrv::poincare(rr);
  out["poincare"] = {{"sd1_ms", pc.sd1_ms}, {"sd2_ms", pc.sd2_ms}};
  const auto stress = hrv::stress_level(m.rmssd_ms);
  out["stress"] = {{"hrv_score", stress.hrv_score}, {"level", std::string(hrv::to_string(stress.level))}};
  return out;
}

telemetry::DeviceKey key_for(const std::string& keys_path, const std::string& device_hex) {
  telemetry::KeyStore store;
  telemetry::KeyStore::load_into(store, keys_path);
  const auto id = telemetry::DeviceId::from_hex(device_hex);
  auto key = store.find(id);
  if (!key) throw Error(Errc::UnknownDevice, "device " + device_hex + " is not in " + keys_path);
  return *key;
}

Channel parse_channel(const std::string& name) {
  const auto c = channel_from_string(name);
  if (!c) throw Error(Errc::WrongChannel, "unknown channel " + name);
  return *c;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mywear: smart-garment signal analysis"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--config", common.config_path, "key = value config file")->check(CLI::ExistingFile);
  app.add_option("--set", common.overrides, "override a config key (key=value), repeatable");
  app.add_option("--seed", common.seed, "RNG seed for training, splits and synthetic data");

  // replay
  auto* replay_cmd = app.add_subcommand("replay", "run the full analysis chain over recorded CSV files");
  Inputs replay_in;
  replay_in.bind(replay_cmd);
  std::string replay_model, replay_out;
  replay_cmd->add_option("--model", replay_model, "beat model file (overrides model_path)");
  replay_cmd->add_option("--out", replay_out, "output directory (overrides output_dir)");

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "TCP ingest service for encrypted telemetry");
  std::string serve_listen, keys_path;
  serve_cmd->add_option("--listen", serve_listen, "host:port (overrides listen_address)");
  serve_cmd->add_option("--keys", keys_path, "paired key store (overrides keys_path)");

  // emulate
  auto* emulate_cmd = app.add_subcommand("emulate", "stream recorded CSVs to a server as encrypted frames");
  Inputs emulate_in;
  emulate_in.bind(emulate_cmd);
  std::string emu_host = "127.0.0.1", emu_device;
  std::uint16_t emu_port = 7070;
  std::size_t emu_batch = 64;
  std::uint64_t emu_first_seq = 1;
  emulate_cmd->add_option("--host", emu_host);
  emulate_cmd->add_option("--port", emu_port);
  emulate_cmd->add_option("--device", emu_device, "device id, 16 hex digits (default: config device_id)");
  emulate_cmd->add_option("--keys", keys_path, "key store (overrides keys_path)");
  emulate_cmd->add_option("--batch", emu_batch, "samples per frame");
  emulate_cmd->add_option("--first-seq", emu_first_seq, "sequence number of the first frame");

  // hrv
  auto* hrv_cmd = app.add_subcommand("hrv", "R peaks, HRV metrics, Poincare and stress band of one ECG file");
  std::string hrv_ecg;
  std::optional<double> hrv_rate;
  hrv_cmd->add_option("--ecg", hrv_ecg)->required();
  hrv_cmd->add_option("--rate", hrv_rate, "sampling rate in Hz (default: inferred from t_ms)");

  // train
  auto* train_cmd = app.add_subcommand("train", "train the beat or fall CNN");
  std::string train_kind = "beat", train_data, train_out = "model.bin";
  std::size_t train_synth = 10000, train_epochs = 10, train_batch = 64;
  double train_lr = 0.001, train_test_fraction = 0.18;
  bool train_weighted = false;
  train_cmd->add_option("kind", train_kind, "beat or fall")->check(CLI::IsMember({"beat", "fall"}));
  train_cmd->add_option("--data", train_data, "188-column beat CSV (label last)");
  train_cmd->add_option("--synthetic", train_synth, "number of synthetic examples when --data is absent");
  train_cmd->add_option("--epochs", train_epochs);
  train_cmd->add_option("--batch", train_batch);
  train_cmd->add_option("--lr", train_lr);
  train_cmd->add_option("--test-fraction", train_test_fraction, "stratified held-out share for the test evaluation");
  train_cmd->add_flag("--class-weighting", train_weighted, "inverse-frequency sample weights");
  train_cmd->add_option("--out", train_out);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "accuracy, precision, recall and confusion of a beat model");
  std::string eval_model, eval_data;
  std::size_t eval_synth = 2000;
  eval_cmd->add_option("--model", eval_model)->required();
  eval_cmd->add_option("--data", eval_data, "188-column beat CSV");
  eval_cmd->add_option("--synthetic", eval_synth, "synthetic test segments when --data is absent");

  // classify
  auto* classify_cmd = app.add_subcommand("classify", "label every beat of an ECG recording");
  std::string cls_model, cls_ecg;
  classify_cmd->add_option("--model", cls_model)->required();
  classify_cmd->add_option("--ecg", cls_ecg)->required();

  // fall
  auto* fall_cmd = app.add_subcommand("fall", "fall events and per-window predictions over an IMU trace");
  std::string fall_imu, fall_model;
  fall_cmd->add_option("--imu", fall_imu)->required();
  fall_cmd->add_option("--model", fall_model, "fall CNN from 'train fall'");

  // orient
  auto* orient_cmd = app.add_subcommand("orient", "calibrated Euler angles and posture labels as CSV");
  std::string orient_imu, orient_calib;
  orient_cmd->add_option("--imu", orient_imu)->required();
  orient_cmd->add_option("--calib", orient_calib, "still-standing IMU CSV for calibration (default: first second of --imu)");

  // emg
  auto* emg_cmd = app.add_subcommand("emg", "envelope, activity peaks and intensity of one EMG channel");
  std::string emg_file, emg_channel = "emg_bicep";
  std::optional<double> emg_calib_max;
  emg_cmd->add_option("--signal,--emg", emg_file)->required();
  emg_cmd->add_option("--calib-max", emg_calib_max, "maximum voluntary contraction in mV (overrides emg_calibration_max_mv)");
  emg_cmd->add_option("--channel", emg_channel)->check(CLI::IsMember({"emg_bicep", "emg_chest"}));

  // keygen
  auto* keygen_cmd = app.add_subcommand("keygen", "pair a device: generate and store its AES-128 key");
  std::string kg_device;
  keygen_cmd->add_option("--device", kg_device, "16 hex digits")->required();
  keygen_cmd->add_option("--keys", keys_path, "key store (overrides keys_path)");

  // encrypt / decrypt
  auto* encrypt_cmd = app.add_subcommand("encrypt", "seal one channel CSV into a single frame");
  std::string enc_in, enc_out, enc_device, enc_channel = "ecg";
  std::uint64_t enc_seq = 1;
  encrypt_cmd->add_option("--in", enc_in)->required();
  encrypt_cmd->add_option("--out", enc_out)->required();
  encrypt_cmd->add_option("--device", enc_device)->required();
  encrypt_cmd->add_option("--channel", enc_channel);
  encrypt_cmd->add_option("--seq", enc_seq);
  encrypt_cmd->add_option("--keys", keys_path, "key store (overrides keys_path)");
  auto* decrypt_cmd = app.add_subcommand("decrypt", "open a frame and print its samples as CSV");
  std::string dec_in;
  decrypt_cmd->add_option("--in", dec_in)->required();
  decrypt_cmd->add_option("--keys", keys_path, "key store (overrides keys_path)");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "write synthetic fixtures");
  std::string synth_kind, synth_out;
  double synth_duration = 60.0, synth_rr = 800.0, synth_jitter = 0.0;
  std::size_t synth_count = 1000;
  std::vector<double> synth_falls;
  synth_cmd->add_option("kind", synth_kind)->required()->check(CLI::IsMember({"ecg", "imu", "emg", "beats"}));
  synth_cmd->add_option("--out", synth_out)->required();
  synth_cmd->add_option("--duration", synth_duration, "seconds");
  synth_cmd->add_option("--rr", synth_rr, "mean RR interval in ms (ecg)");
  synth_cmd->add_option("--jitter", synth_jitter, "RR jitter in ms (ecg)");
  synth_cmd->add_option("--count", synth_count, "segments (beats)");
  synth_cmd->add_option("--fall-at", synth_falls, "fall times in seconds (imu)");

  CLI11_PARSE(app, argc, argv);

  try {
    auto cfg = common.load();
    auto override_with = [](const std::string& value, std::string& target) {
      if (!value.empty()) target = value;
    };
    override_with(keys_path, cfg.keys_path);
    const std::uint64_t seed = cfg.seed;

    if (*replay_cmd) {
      override_with(replay_model, cfg.model_path);
      override_with(replay_out, cfg.output_dir);
      const auto result = pipeline::replay(cfg, replay_in.replay_inputs(), pipeline::load_beat_model(cfg));
      print(result.report);
      std::cerr << "bundle written to " << result.bundle_dir << '\n';
    } else if (*serve_cmd) {
      override_with(serve_listen, cfg.listen_address);
      telemetry::KeyStore keys;
      telemetry::KeyStore::load_into(keys, cfg.keys_path);
      pipeline::IngestService service(cfg, keys, pipeline::load_beat_model(cfg));
      service.on_session([](const pipeline::SessionResult& r) {
        std::cerr << "session " << r.session << (r.device ? " device " + r.device->hex() : std::string{}) << ": "
                  << (r.ok ? "report written" : r.error) << " (" << r.frames << " frames)\n";
      });
      service.start();
      std::cerr << "listening on port " << service.port() << " with " << keys.size() << " paired devices\n";
      std::signal(SIGINT, [](int) { g_stop = true; });
      std::signal(SIGTERM, [](int) { g_stop = true; });
      while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
      service.stop();
    } else if (*emulate_cmd) {
      const auto key = key_for(cfg.keys_path, emu_device.empty() ? cfg.device_id : emu_device);
      pipeline::EmulatorOptions opts{emu_host, emu_port, emu_batch, emu_first_seq};
      const auto result = pipeline::emulate(key, pipeline::load_replay_samples(emulate_in.replay_inputs()), opts);
      if (!result.ok) {
        std::cerr << "server rejected stream after " << result.frames << " frames: " << result.error << '\n';
        return 1;
      }
      print(result.report);
    } else if (*hrv_cmd) {
      print(hrv_json(csv::read_series(hrv_ecg, Channel::Ecg, hrv_rate), cfg.hrv_xx_ms));
    } else if (*train_cmd) {
      nn::TrainConfig tc;
      tc.epochs = train_epochs;
      tc.batch_size = train_batch;
      tc.learning_rate = train_lr;
      tc.seed = seed;
      tc.class_weighting = train_weighted;
      auto log_epoch = [](std::size_t e, const nn::EpochStats& s) {
        std::cerr << "epoch " << e + 1 << " loss " << s.loss << " train accuracy " << 100.0 * s.accuracy << "%\n";
      };
      if (train_kind == "beat") {
        const auto all = beat_data(train_data, train_synth, seed);
        auto [train_set, test_set] = beats::stratified_split(all, 1.0 - train_test_fraction, seed);
        auto net = beats::build_network({}, seed);
        nn::train(net, beats::to_labeled_set(train_set), tc, log_epoch);
        json meta{{"kind", "beat"}, {"seed", seed}, {"epochs", train_epochs}, {"train_segments", train_set.size()}};
        if (!test_set.empty()) meta["test"] = eval_json(beats::evaluate(net, test_set));
        nn::save(net, train_out, meta);
        print(meta);
      } else {
        const auto windows = synth::fall_corpus(train_synth, seed);
        auto net = motion::build_fall_network(seed);
        const auto data = motion::fall_labeled_set(windows, {cfg.fall_low_g, cfg.fall_high_g, cfg.fall_recovery_ms});
        nn::train(net, data, tc, log_epoch);
        json meta{{"kind", "fall"}, {"seed", seed}, {"epochs", train_epochs}, {"train_windows", windows.size()}};
        nn::save(net, train_out, meta);
        print(meta);
      }
      std::cerr << "model written to " << train_out << '\n';
    } else if (*eval_cmd) {
      const auto net = nn::load(eval_model);
      print(eval_json(beats::evaluate(net, beat_data(eval_data, eval_synth, seed + 1))));
    } else if (*classify_cmd) {
      const beats::NetworkPredictor model(nn::load(cls_model));
      const auto ecg = csv::read_series(cls_ecg, Channel::Ecg);
      const auto peaks = hrv::detect_r_peaks(ecg);
      const auto result = beats::classify_stream(model, ecg, peaks);
      json beats_json = json::array();
      for (const auto& b : result.beats) {
        beats_json.push_back({{"t_ms", ecg.time_of(b.sample_index)},
                              {"label", std::string(to_string(b.label))},
                              {"probability", b.probability}});
      }
      print({{"model_hash", model.model_hash()}, {"beats", beats_json}, {"skipped", result.skipped.size()}});
    } else if (*fall_cmd) {
      const motion::FallThresholds th{cfg.fall_low_g, cfg.fall_high_g, cfg.fall_recovery_ms};
      const auto trace = motion::resultant_trace(csv::read_imu(fall_imu));
      json events = json::array();
      for (const auto& e : motion::detect_fall(trace, th)) {
        events.push_back({{"t_predicted_ms", e.t_predicted_ms}, {"t_detected_ms", e.t_detected_ms},
                          {"min_g", e.min_g}, {"peak_g", e.peak_g}});
      }
      std::optional<nn::Network> model;
      if (!fall_model.empty()) model = nn::load(fall_model);
      json windows = json::array();
      for (std::size_t i = 0; i + motion::kFallWindow <= trace.size(); i += motion::kFallWindow) {
        const std::span<const motion::GSample> w(trace.data() + i, motion::kFallWindow);
        const auto p = motion::predict_fall(w, model ? &*model : nullptr, th);
        json wj{{"t_start_ms", w.front().t_ms}, {"threshold_flag", p.threshold_flag}};
        if (p.cnn_fall_probability) wj["cnn_fall_probability"] = *p.cnn_fall_probability;
        windows.push_back(wj);
      }
      print({{"events", events}, {"windows", windows}});
    } else if (*orient_cmd) {
      const auto imu = csv::read_imu(orient_imu);
      std::vector<ImuSample> still;
      if (!orient_calib.empty()) {
        still = csv::read_imu(orient_calib);
      } else {
        for (const auto& s : imu) {
          if (s.t_ms - imu.front().t_ms > 1000) break;
          still.push_back(s);
        }
      }
      const auto cal = motion::calibrate(still);
      std::cout << "t_ms,roll_deg,pitch_deg,yaw_deg,g,label\n";
      for (const auto& s : imu) {
        const auto o = motion::euler_angles(s, cal);
        std::cout << s.t_ms << ',' << o.roll_deg << ',' << o.pitch_deg << ',' << o.yaw_deg << ','
                  << motion::resultant_acceleration(s) << ','
                  << motion::to_string(motion::orientation_label(o.roll_deg, o.pitch_deg, cfg.orientation_bend_deg))
                  << '\n';
      }
    } else if (*emg_cmd) {
      const auto raw = csv::read_series(emg_file, parse_channel(emg_channel));
      emg::ActivityConfig ac;
      ac.rest_ms = cfg.emg_rest_ms;
      ac.calibration_max = emg_calib_max.value_or(cfg.emg_calibration_max_mv);
      ac.peaks.k_sigma = cfg.emg_k_sigma;
      const auto act = emg::analyze_muscle(raw, ac);
      json peaks = json::array();
      for (const auto& p : act.peaks) peaks.push_back({{"t_ms", p.t_ms}, {"amplitude_mv", p.amplitude}});
      json envelope = json::array();
      for (std::size_t i = 0; i < act.envelope.size(); ++i) {
        envelope.push_back({act.envelope.time_of(i), act.envelope.values()[i]});
      }
      print({{"channel", emg_channel},
             {"calibration_max_mv", ac.calibration_max},
             {"envelope", envelope},
             {"rest_baseline", {{"mean_mv", act.baseline.mean}, {"sigma_mv", act.baseline.sigma}}},
             {"peaks", peaks},
             {"intensity", std::string(emg::to_string(act.intensity))}});
    } else if (*keygen_cmd) {
      telemetry::KeyStore store;
      if (std::filesystem::exists(cfg.keys_path)) telemetry::KeyStore::load_into(store, cfg.keys_path);
      telemetry::SystemRandom rng;
      const auto key = store.pair(telemetry::DeviceId::from_hex(kg_device), rng, pipeline::now_ms());
      store.save(cfg.keys_path);
      std::cerr << "paired " << key.device_id.hex() << " in " << cfg.keys_path << " (" << store.size()
                << " devices)\n";
    } else if (*encrypt_cmd) {
      const auto key = key_for(cfg.keys_path, enc_device);
      const auto col = csv::read_channel(enc_in);
      std::vector<TimedSample> samples;
      for (std::size_t i = 0; i < col.values.size(); ++i) samples.push_back({col.t_ms[i], static_cast<float>(col.values[i])});
      const auto frame = telemetry::encode_frame(
          telemetry::encrypt_frame(key, enc_seq, parse_channel(enc_channel), telemetry::encode_samples(samples)));
      std::ofstream out(enc_out, std::ios::binary);
      out.write(reinterpret_cast<const char*>(frame.data()), static_cast<std::streamsize>(frame.size()));
      if (!out) throw Error(Errc::Io, "cannot write " + enc_out);
    } else if (*decrypt_cmd) {
      const auto bytes = read_file(dec_in);
      const auto frame = telemetry::decode_frame(bytes);
      const auto key = key_for(cfg.keys_path, frame.header.device_id.hex());
      const auto opened = telemetry::decrypt_frame(key, frame);
      std::cerr << "device " << opened.device_id.hex() << " seq " << opened.seq << " channel "
                << to_string(opened.channel) << '\n';
      std::cout << "t_ms,value\n";
      for (const auto& s : telemetry::decode_samples(opened.plaintext)) std::cout << s.t_ms << ',' << s.value << '\n';
    } else if (*synth_cmd) {
      if (synth_kind == "ecg") {
        synth::EcgConfig ec;
        ec.rate_hz = cfg.ecg_rate_hz;
        ec.duration_s = synth_duration;
        ec.mean_rr_ms = synth_rr;
        ec.rr_jitter_ms = synth_jitter;
        ec.seed = seed;
        const auto s = synth::ecg(ec);
        csv::TimedColumn col;
        for (std::size_t i = 0; i < s.series.size(); ++i) {
          col.t_ms.push_back(s.series.time_of(i));
          col.values.push_back(s.series.values()[i]);
        }
        csv::write_channel(synth_out, col);
      } else if (synth_kind == "imu") {
        synth::ImuConfig ic;
        ic.rate_hz = cfg.imu_rate_hz;
        ic.duration_s = synth_duration;
        ic.falls_at_s = synth_falls;
        ic.seed = seed;
        csv::write_imu(synth_out, synth::imu(ic));
      } else if (synth_kind == "emg") {
        synth::EmgConfig mc;
        mc.rate_hz = cfg.emg_rate_hz;
        mc.duration_s = synth_duration;
        mc.seed = seed;
        for (double t = 2.0; t + 0.5 < synth_duration; t += 3.0) mc.bursts.push_back({t, 0.5, 0.5});
        const auto s = synth::emg(mc);
        csv::TimedColumn col;
        for (std::size_t i = 0; i < s.size(); ++i) {
          col.t_ms.push_back(s.time_of(i));
          col.values.push_back(s.values()[i]);
        }
        csv::write_channel(synth_out, col);
      } else {
        const auto segs = synth::beat_corpus(synth_count, seed);
        beats::write_segments(synth_out, segs);
      }
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
