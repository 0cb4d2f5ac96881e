#include <doctest.h>

#include <future>
#include <thread>

#include "transport.hpp"
#include "mywear/error.hpp"

using namespace mywear;
using namespace mywear::pipeline;

namespace {

struct Server {
  telemetry::KeyStore keys;
  std::unique_ptr<IngestService> service;

  Server(PipelineConfig cfg, const std::vector<telemetry::DeviceKey>& paired,
         std::shared_ptr<const beats::BeatPredictor> model = nullptr) {
    for (const auto& k : paired) keys.insert(k);
    cfg.listen_address = "127.0.0.1:0";
    service = std::make_unique<IngestService>(cfg, keys, std::move(model));
    service->start();
  }
  ~Server() { service->stop(); }

  EmulatorOptions opts(std::uint64_t first_seq = 1) const {
    EmulatorOptions o;
    o.port = service->port();
    o.first_seq = first_seq;
    return o;
  }
};

std::vector<TimedSample> ramp(std::size_t n) {
  std::vector<TimedSample> v;
  for (std::size_t i = 0; i < n; ++i) v.push_back({static_cast<std::int64_t>(i), static_cast<float>(i)});
  return v;
}

}  // namespace

TEST_CASE("an unpaired device gets an error and no report") {
  const auto dir = fixtures::scratch("svc_unpaired");
  Server srv(fixtures::short_windows(dir), {fixtures::fixed_key(1)});
  const auto res = emulate(fixtures::fixed_key(2), {{Channel::Temperature, ramp(10)}}, srv.opts());
  CHECK_FALSE(res.ok);
  CHECK(res.error.find("UnknownDevice") != std::string::npos);
  CHECK(res.report.is_null());
  srv.service->stop();
  const auto results = srv.service->results();
  REQUIRE(results.size() == 1);
  CHECK_FALSE(results[0].ok);
}

TEST_CASE("a tampered frame ends the session") {
  const auto dir = fixtures::scratch("svc_tamper");
  const auto key = fixtures::fixed_key(3);
  Server srv(fixtures::short_windows(dir), {key});
  telemetry::FrameSender sender(key);
  const auto samples = ramp(20);
  std::vector<std::vector<std::uint8_t>> frames;
  for (std::uint64_t seq = 1; seq <= 3; ++seq) {
    const auto chunk = std::span(samples).subspan((seq - 1) * 5, 5);
    frames.push_back(telemetry::encode_frame(sender.seal(seq, Channel::Temperature, telemetry::encode_samples(chunk))));
  }
  frames[1][telemetry::kHeaderBytes + 3] ^= 0x10;
  const auto res = send_frames(frames, "127.0.0.1", srv.service->port());
  CHECK_FALSE(res.ok);
  CHECK(res.error.find("AuthenticationFailure") != std::string::npos);
}

TEST_CASE("a replayed sequence number is rejected across sessions") {
  const auto dir = fixtures::scratch("svc_replay");
  const auto key = fixtures::fixed_key(4);
  Server srv(fixtures::short_windows(dir), {key});
  CHECK(emulate(key, {{Channel::Temperature, ramp(10)}}, srv.opts(1)).ok);
  const auto again = emulate(key, {{Channel::Temperature, ramp(10)}}, srv.opts(1));
  CHECK_FALSE(again.ok);
  CHECK(again.error.find("ReplayedSequence") != std::string::npos);
  CHECK(emulate(key, {{Channel::Temperature, ramp(10)}}, srv.opts(100)).ok);
}

TEST_CASE("a session may not switch devices") {
  const auto dir = fixtures::scratch("svc_switch");
  const auto a = fixtures::fixed_key(5), b = fixtures::fixed_key(6);
  Server srv(fixtures::short_windows(dir), {a, b});
  const auto s = telemetry::encode_samples(ramp(4));
  const auto res = send_frames({telemetry::encode_frame(telemetry::encrypt_frame(a, 1, Channel::Temperature, s)),
                                telemetry::encode_frame(telemetry::encrypt_frame(b, 1, Channel::Temperature, s))},
                               "127.0.0.1", srv.service->port());
  CHECK_FALSE(res.ok);
  CHECK(res.error.find("MalformedFrame") != std::string::npos);
}

TEST_CASE("streaming through the service matches offline replay") {
  const auto dir = fixtures::scratch("svc_transparency");
  const auto run = fixtures::device_run(dir / "in", 11);
  auto model = std::make_shared<fixtures::ConstantPredictor>(BeatClass::S);
  const auto cfg = fixtures::short_windows(dir / "out");
  const auto expected = fixtures::replay_view(cfg, run, model);

  Server srv(cfg, {run.key}, model);
  for (std::size_t spf : {1000u, 37u}) {
    auto o = srv.opts(spf == 1000 ? 1 : 1'000'000);
    o.samples_per_frame = spf;
    const auto res = emulate(run.key, run.channels, o);
    REQUIRE_MESSAGE(res.ok, res.error);
    CHECK(analysis_view(res.report) == expected);
  }
  CHECK(std::filesystem::exists(dir / "out" / run.key.device_id.hex() / "report-session-0.json"));
}

TEST_CASE("sixteen concurrent sessions") {
  const auto dir = fixtures::scratch("svc_concurrent");
  std::vector<telemetry::DeviceKey> keys;
  for (std::uint64_t d = 100; d < 116; ++d) keys.push_back(fixtures::fixed_key(d));
  Server srv(fixtures::short_windows(dir), keys);
  std::vector<std::future<EmulatorResult>> jobs;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    jobs.push_back(std::async(std::launch::async, [&, i] {
      auto samples = ramp(200 + i);
      auto o = srv.opts();
      o.samples_per_frame = 8;
      return emulate(keys[i], {{Channel::Temperature, samples}}, o);
    }));
  }
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto res = jobs[i].get();
    REQUIRE_MESSAGE(res.ok, res.error);
    CHECK(res.report["temperature"]["samples"] == 200 + i);
    CHECK(res.report["device_id"] == keys[i].device_id.hex());
  }
}

TEST_CASE("two devices at once give the same reports as one after the other") {
  const auto dir = fixtures::scratch("svc_two_devices");
  const auto a = fixtures::device_run(dir / "a", 21, 45), b = fixtures::device_run(dir / "b", 22, 45);
  auto model = std::make_shared<fixtures::ConstantPredictor>(BeatClass::N);
  const auto cfg = fixtures::short_windows(dir / "out");
  Server srv(cfg, {a.key, b.key}, model);

  const auto seq_a = emulate(a.key, a.channels, srv.opts(1));
  const auto seq_b = emulate(b.key, b.channels, srv.opts(1));
  REQUIRE(seq_a.ok);
  REQUIRE(seq_b.ok);

  auto fa = std::async(std::launch::async, [&] { return emulate(a.key, a.channels, srv.opts(1'000'000)); });
  auto fb = std::async(std::launch::async, [&] { return emulate(b.key, b.channels, srv.opts(1'000'000)); });
  const auto par_a = fa.get(), par_b = fb.get();
  REQUIRE(par_a.ok);
  REQUIRE(par_b.ok);
  CHECK(analysis_view(par_a.report) == analysis_view(seq_a.report));
  CHECK(analysis_view(par_b.report) == analysis_view(seq_b.report));
  CHECK(analysis_view(par_a.report) != analysis_view(par_b.report));
}
