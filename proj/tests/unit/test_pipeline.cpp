#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

#include "fixtures.hpp"
#include "mywear/analyzer.hpp"
#include "mywear/error.hpp"

using namespace mywear;
using namespace mywear::pipeline;

namespace {

const auto kDevice = telemetry::DeviceId::from_u64(7);

WindowSummary win(bool abnormal, std::int64_t t = 0) { return {t, true, 10, abnormal ? 2u : 0u, abnormal ? "V" : ""}; }

std::vector<std::string> kinds(const std::vector<Alert>& alerts) {
  std::vector<std::string> k;
  for (const auto& a : alerts) k.emplace_back(to_string(a.kind));
  return k;
}

std::vector<TimedSample> wire(const SampleSeries& s) {
  std::vector<TimedSample> v;
  for (std::size_t i = 0; i < s.size(); ++i) v.push_back({s.time_of(i), static_cast<float>(s.values()[i])});
  return v;
}

class FlakySink final : public AlertSink {
 public:
  explicit FlakySink(int failures) : failures_(failures) {}
  std::string name() const override { return "flaky"; }
  void deliver(const Alert&) override {
    ++calls;
    if (calls <= failures_) throw Error(Errc::SinkUnavailable, "down");
  }
  int calls = 0;

 private:
  int failures_;
};

}  // namespace

TEST_CASE("config file: comments, overrides, validation, hash") {
  const auto dir = fixtures::scratch("config");
  std::ofstream(dir / "a.conf") << "# test config\n"
                                   "ecg_window_ms = 60000   # one minute\n"
                                   "\n"
                                   "consecutive_abnormal=3\n"
                                   "webhook_url = http://localhost:9/x\n"
                                   "alert_stdout = true\n";
  const auto cfg = PipelineConfig::load(dir / "a.conf");
  CHECK(cfg.ecg_window_ms == 60000);
  CHECK(cfg.consecutive_abnormal == 3);
  CHECK(cfg.alert_stdout);
  CHECK(cfg.webhook_url == "http://localhost:9/x");

  PipelineConfig reloaded;
  std::istringstream dump(cfg.dump());
  for (std::string line; std::getline(dump, line);) {
    const auto eq = line.find(" = ");
    if (eq != std::string::npos) reloaded.set(line.substr(0, eq), line.substr(eq + 3));
  }
  CHECK(reloaded.dump() == cfg.dump());

  // Paths and addresses do not change the analysis hash; thresholds do.
  PipelineConfig moved = cfg;
  moved.output_dir = "elsewhere";
  moved.device_id = "00000000000000ff";
  CHECK(moved.hash() == cfg.hash());
  PipelineConfig tuned = cfg;
  tuned.fall_low_g = 0.8;
  CHECK(tuned.hash() != cfg.hash());

  PipelineConfig bad;
  CHECK_THROWS_AS(bad.set("no_such_key", "1"), Error);
  CHECK_THROWS_AS(bad.set("fall_low_g", "abc"), Error);
  bad.ecg_schedule_ms = 1000;
  CHECK_THROWS_AS(bad.validate(), Error);
  PipelineConfig negative;
  negative.fall_high_g = -1;
  CHECK_THROWS_AS(negative.validate(), Error);
  std::ofstream(dir / "b.conf") << "ecg_window_ms 5\n";
  CHECK_THROWS_AS(PipelineConfig::load(dir / "b.conf"), Error);
}

TEST_CASE("abnormality rule tables") {
  const RuleConfig rc;
  CHECK(abnormality_rule(std::vector{win(false), win(false)}, rc, kDevice).empty());
  CHECK(kinds(abnormality_rule(std::vector{win(true), win(true)}, rc, kDevice)) ==
        std::vector<std::string>{"AbnormalBeat", "AbnormalBeat", "PotentialHeartFailure"});
  CHECK(kinds(abnormality_rule(std::vector{win(true), win(false), win(true)}, rc, kDevice)) ==
        std::vector<std::string>{"AbnormalBeat", "AbnormalBeat"});
  // The run resets after escalating: a third abnormal window starts over.
  CHECK(kinds(abnormality_rule(std::vector{win(true), win(true), win(true)}, rc, kDevice)) ==
        std::vector<std::string>{"AbnormalBeat", "AbnormalBeat", "PotentialHeartFailure", "AbnormalBeat"});
  CHECK(kinds(abnormality_rule(std::vector{win(true), win(true), win(true), win(true)}, rc, kDevice)) ==
        std::vector<std::string>{"AbnormalBeat", "AbnormalBeat", "PotentialHeartFailure", "AbnormalBeat",
                                 "AbnormalBeat", "PotentialHeartFailure"});
  // An unclassified window breaks a run.
  WindowSummary unclassified{0, false, 0, 0, ""};
  CHECK(kinds(abnormality_rule(std::vector{win(true), unclassified, win(true)}, rc, kDevice)) ==
        std::vector<std::string>{"AbnormalBeat", "AbnormalBeat"});
  // Per-window threshold damps single stray beats.
  const RuleConfig damped{2, 3};
  CHECK(abnormality_rule(std::vector{win(true), win(true)}, damped, kDevice).empty());
}

TEST_CASE("stdout sink writes one JSON line per alert") {
  std::ostringstream out;
  StreamSink sink(out);
  Alert a{1500, kDevice, AlertKind::FallDetected, "min 0.3 g"};
  AlertSink* sinks[] = {&sink};
  dispatch_alert(a, sinks, {});
  CHECK(a.delivery_status == "delivered");
  const auto text = out.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == 1);
  const auto j = nlohmann::json::parse(text);
  CHECK(j["kind"] == "FallDetected");
  CHECK(j["t_ms"] == 1500);
  CHECK(j["device_id"] == kDevice.hex());
}

TEST_CASE("retry policy") {
  RetryPolicy fast{3, 1, 4};
  FlakySink recovers(2), dead(100);
  Alert a{0, kDevice, AlertKind::NoSignal, ""};
  AlertSink* one[] = {&recovers};
  const auto rec = dispatch_alert(a, one, fast);
  CHECK(a.delivery_status == "delivered");
  CHECK(rec[0].attempts == 3);

  AlertSink* both[] = {&dead, &recovers};
  dispatch_alert(a, both, fast);
  CHECK(dead.calls == 3);
  CHECK(a.delivery_status == "partial");

  AlertSink* only_dead[] = {&dead};
  const auto failed = dispatch_alert(a, only_dead, fast);
  CHECK(a.delivery_status == "failed");
  CHECK_FALSE(failed[0].delivered);
  CHECK(failed[0].error.find("SinkUnavailable") != std::string::npos);

  dispatch_alert(a, std::span<AlertSink* const>{}, fast);
  CHECK(a.delivery_status == "no_sinks");
}

TEST_CASE("webhook sink against a live and a failing server") {
  httplib::Server server;
  std::atomic<int> ok_hits{0}, fail_hits{0};
  std::string last_body;
  server.Post("/ok", [&](const httplib::Request& req, httplib::Response& res) {
    ++ok_hits;
    last_body = req.body;
    res.status = 204;
  });
  server.Post("/down", [&](const httplib::Request&, httplib::Response& res) {
    ++fail_hits;
    res.status = 503;
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  Alert a{42, kDevice, AlertKind::AbnormalBeat, "1/10 abnormal beats"};
  WebhookSink good("http://127.0.0.1:" + std::to_string(port) + "/ok");
  AlertSink* g[] = {&good};
  dispatch_alert(a, g, {3, 1, 4});
  CHECK(a.delivery_status == "delivered");
  CHECK(ok_hits == 1);
  CHECK(nlohmann::json::parse(last_body)["detail"] == "1/10 abnormal beats");

  WebhookSink down("http://127.0.0.1:" + std::to_string(port) + "/down");
  AlertSink* d[] = {&down};
  dispatch_alert(a, d, {3, 1, 4});
  CHECK(a.delivery_status == "failed");
  CHECK(fail_hits == 3);

  server.stop();
  th.join();

  WebhookSink unreachable("http://127.0.0.1:" + std::to_string(port) + "/ok", 200);
  AlertSink* u[] = {&unreachable};
  const auto rec = dispatch_alert(a, u, {3, 1, 4});
  CHECK(a.delivery_status == "failed");
  CHECK(rec[0].attempts == 3);

  CHECK_THROWS_AS(WebhookSink("https://example.invalid/"), Error);
}

TEST_CASE("uniform beats give RMSSD 0, High stress and the constant-RR caveat") {
  const auto dir = fixtures::scratch("constant_rr");
  auto cfg = fixtures::short_windows(dir);
  synth::EcgConfig ec;
  ec.duration_s = 25;
  ec.mean_rr_ms = 800;
  const auto ecg = synth::ecg(ec);
  StreamAnalyzer an(cfg, kDevice);
  an.push(Channel::Ecg, wire(ecg.series));
  const auto report = an.finish();
  const auto& w = report["ecg"]["windows"][0];
  CHECK(w["status"] == "ok");
  CHECK(w["hrv"]["rmssd_ms"] == 0.0);
  CHECK(w["hrv"]["mean_rr_ms"] == 800.0);
  CHECK(w["stress"]["level"] == "High");
  CHECK(w["stress"]["caveat"] == "constant_rr");
}

TEST_CASE("two consecutive abnormal windows escalate once") {
  const auto dir = fixtures::scratch("escalation");
  auto cfg = fixtures::short_windows(dir);
  synth::EcgConfig ec;
  ec.duration_s = 55;
  ec.rr_jitter_ms = 20;
  auto model = std::make_shared<fixtures::ConstantPredictor>(BeatClass::V);
  StreamAnalyzer an(cfg, kDevice, model);
  an.push(Channel::Ecg, wire(synth::ecg(ec).series));
  const auto report = an.finish();
  REQUIRE(report["ecg"]["windows"].size() == 2);
  std::vector<std::string> k;
  for (const auto& a : report["alerts"]) k.push_back(a["kind"]);
  CHECK(k == std::vector<std::string>{"AbnormalBeat", "AbnormalBeat", "PotentialHeartFailure"});
  CHECK(report["model_hash"] == "constant-V");
  CHECK(report["ecg"]["windows"][0]["classification"]["counts"]["V"].get<int>() > 10);
}

TEST_CASE("normal beats raise nothing") {
  const auto dir = fixtures::scratch("normal");
  auto cfg = fixtures::short_windows(dir);
  synth::EcgConfig ec;
  ec.duration_s = 55;
  StreamAnalyzer an(cfg, kDevice, std::make_shared<fixtures::ConstantPredictor>(BeatClass::N));
  an.push(Channel::Ecg, wire(synth::ecg(ec).series));
  CHECK(an.finish()["alerts"].empty());
}

TEST_CASE("flat ECG raises NoSignal") {
  const auto dir = fixtures::scratch("nosignal");
  auto cfg = fixtures::short_windows(dir);
  StreamAnalyzer an(cfg, kDevice);
  an.push(Channel::Ecg, wire(make_sample_series(Channel::Ecg, 250, 0, std::vector<double>(5000, 0.01))));
  const auto report = an.finish();
  CHECK(report["ecg"]["windows"][0]["status"] == "no_signal");
  REQUIRE(report["alerts"].size() == 1);
  CHECK(report["alerts"][0]["kind"] == "NoSignal");
}

TEST_CASE("trailing partial window is reported as incomplete") {
  const auto dir = fixtures::scratch("incomplete");
  auto cfg = fixtures::short_windows(dir);
  synth::EcgConfig ec;
  ec.duration_s = 40;
  StreamAnalyzer an(cfg, kDevice);
  an.push(Channel::Ecg, wire(synth::ecg(ec).series));
  const auto report = an.finish();
  REQUIRE(report["ecg"]["windows"].size() == 2);
  CHECK(report["ecg"]["windows"][0]["status"] == "ok");
  CHECK(report["ecg"]["windows"][1]["status"] == "incomplete");
  CHECK(report["ecg"]["windows"][1]["t_start_ms"] == 30000);
}

TEST_CASE("time going backwards on a channel is rejected") {
  StreamAnalyzer an(PipelineConfig{}, kDevice);
  an.push(Channel::Temperature, std::vector<TimedSample>{{10, 36.5f}});
  CHECK_THROWS_AS(an.push(Channel::Temperature, std::vector<TimedSample>{{10, 36.6f}}), Error);
}

TEST_CASE("report does not depend on chunking or channel interleaving") {
  const auto dir = fixtures::scratch("chunking");
  const auto files = fixtures::write_recording(dir, 3);
  ReplayInputs in{files.ecg, files.imu, files.emg_bicep, files.emg_chest, files.temperature};
  const auto channels = load_replay_samples(in);
  auto cfg = fixtures::short_windows(dir);
  auto model = std::make_shared<fixtures::ConstantPredictor>(BeatClass::N);

  StreamAnalyzer whole(cfg, kDevice, model);
  for (const auto& [c, s] : channels) whole.push(c, s);
  const auto expected = whole.finish();

  for (std::size_t chunk : {1u, 7u, 64u, 1000u}) {
    StreamAnalyzer pieces(cfg, kDevice, model);
    std::vector<std::size_t> cursor(channels.size(), 0);
    for (bool more = true; more;) {
      more = false;
      for (std::size_t c = channels.size(); c-- > 0;) {
        const auto& s = channels[c].second;
        if (cursor[c] >= s.size()) continue;
        const std::size_t n = std::min(chunk, s.size() - cursor[c]);
        pieces.push(channels[c].first, std::span(s).subspan(cursor[c], n));
        cursor[c] += n;
        more = true;
      }
    }
    CHECK(pieces.finish() == expected);
  }
}

TEST_CASE("replay writes a report bundle and the alert log") {
  const auto dir = fixtures::scratch("replay");
  const auto files = fixtures::write_recording(dir, 1);
  auto cfg = fixtures::short_windows(dir / "out");
  cfg.device_id = kDevice.hex();
  const auto result = replay(cfg, {files.ecg, files.imu, files.emg_bicep, files.emg_chest, files.temperature},
                             std::make_shared<fixtures::ConstantPredictor>(BeatClass::N));
  const auto& r = result.report;
  CHECK(r["schema_version"] == kReportSchemaVersion);
  CHECK(r["config_hash"] == cfg.hash());
  CHECK(r["motion"]["fall_events"].size() == 1);
  CHECK(r["motion"]["orientation"]["label_counts"].contains("BendForward"));
  // Bursts at 2.0 s and 6.0 s, 600 ms each; the tail of a burst may hold a
  // second local maximum, but nothing is reported outside the bursts.
  const auto& peaks = r["emg"]["bicep"]["peaks"];
  std::array<bool, 2> burst_hit{};
  std::int64_t prev_t = -1;
  for (const auto& p : peaks) {
    const std::int64_t t = p["t_ms"];
    CHECK(t > prev_t);
    prev_t = t;
    const bool first = t >= 2000 && t <= 2600, second = t >= 6000 && t <= 6600;
    CHECK((first || second));
    burst_hit[0] |= first;
    burst_hit[1] |= second;
  }
  CHECK(burst_hit[0]);
  CHECK(burst_hit[1]);
  CHECK(r["emg"]["bicep"]["intensity"] == "High");
  CHECK(r["temperature"]["samples"] == 60);
  CHECK(r.contains("generated_at_ms"));
  for (const auto& a : r["alerts"]) CHECK(a["delivery_status"] == "delivered");

  CHECK(std::filesystem::exists(result.bundle_dir / "report.json"));
  CHECK(std::filesystem::exists(result.bundle_dir / "plots" / "ecg_window_0.csv"));
  CHECK(std::filesystem::exists(result.bundle_dir / "plots" / "poincare_0.csv"));
  CHECK(std::filesystem::exists(result.bundle_dir / "plots" / "imu.csv"));
  CHECK(std::filesystem::exists(result.bundle_dir / "plots" / "emg_bicep_envelope.csv"));
  std::ifstream log(result.bundle_dir / "alerts.jsonl");
  std::size_t lines = 0;
  for (std::string line; std::getline(log, line);) ++lines;
  CHECK(lines == r["alerts"].size());
}

TEST_CASE("replay without IMU data skips the motion stage") {
  const auto dir = fixtures::scratch("no_imu");
  const auto files = fixtures::write_recording(dir, 2, 25);
  std::ofstream(dir / "empty_imu.csv") << "t_ms,ax,ay,az\n";
  auto cfg = fixtures::short_windows(dir / "out");
  const auto result = replay(cfg, {files.ecg, dir / "empty_imu.csv", std::nullopt, std::nullopt, std::nullopt});
  CHECK(result.report["motion"]["status"] == "skipped");
  bool noted = false;
  for (const auto& n : result.report["notes"]) noted |= n.get<std::string>().find("IMU") != std::string::npos;
  CHECK(noted);
  CHECK(result.report["emg"]["bicep"].is_null());
}

TEST_CASE("analysis view drops only volatile fields") {
  nlohmann::json r{{"generated_at_ms", 5}, {"alerts", {{{"kind", "NoSignal"}, {"delivery_status", "failed"}}}}, {"x", 1}};
  const auto v = analysis_view(r);
  CHECK_FALSE(v.contains("generated_at_ms"));
  CHECK_FALSE(v["alerts"][0].contains("delivery_status"));
  CHECK(v["alerts"][0]["kind"] == "NoSignal");
  CHECK(v["x"] == 1);
}
