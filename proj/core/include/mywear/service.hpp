#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <nlohmann/json.hpp>
#include <string>
#include <thread>
#include <vector>

#include "mywear/analyzer.hpp"
#include "mywear/config.hpp"
#include "mywear/telemetry.hpp"

namespace mywear::pipeline {

// TCP protocol. The client sends any number of [u32 BE length][frame bytes]
// messages and ends the stream with a zero length. The server answers once
// with [u8 status][u32 BE length][body] and closes: status 0 carries the
// report JSON, status 1 an error message. A frame that fails authentication,
// comes from an unpaired device or switches device mid-session ends the
// session with status 1 and no analysis is reported.
inline constexpr std::size_t kMaxFrameBytes = telemetry::kHeaderBytes + telemetry::kMaxPayloadBytes + telemetry::kTagBytes;

struct SessionResult {
  std::uint64_t session = 0;
  std::optional<telemetry::DeviceId> device;
  bool ok = false;
  std::string error;
  nlohmann::json report;
  std::size_t frames = 0;
};

/// Listens on cfg.listen_address ("a.b.c.d:port", port 0 picks a free one).
/// One thread per connection; analysis within a session is sequential.
class IngestService {
 public:
  IngestService(PipelineConfig cfg, const telemetry::KeyStore& keys,
                std::shared_ptr<const beats::BeatPredictor> model = nullptr);
  ~IngestService();
  IngestService(const IngestService&) = delete;
  IngestService& operator=(const IngestService&) = delete;

  /// Binds and starts accepting. Throws Io.
  void start();
  std::uint16_t port() const noexcept { return port_; }
  /// Stops accepting, aborts open sessions and joins all threads.
  void stop();

  /// Called from the session thread when a session ends.
  void on_session(std::function<void(const SessionResult&)> cb);
  std::vector<SessionResult> results() const;

 private:
  struct DeviceSinks {
    std::vector<std::unique_ptr<AlertSink>> owned;
    std::vector<AlertSink*> raw;
  };
  struct Worker {
    std::thread thread;
    std::shared_ptr<std::atomic<bool>> done;
  };

  void accept_loop();
  void run_session(int fd, std::uint64_t id);
  SessionResult handle(int fd, std::uint64_t id);
  std::span<AlertSink* const> sinks_for(telemetry::DeviceId device);
  void reap(bool all);

  PipelineConfig cfg_;
  const telemetry::KeyStore& keys_;
  std::shared_ptr<const beats::BeatPredictor> model_;
  telemetry::SequenceGuard guard_;

  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> running_{false};
  std::thread acceptor_;

  mutable std::mutex mu_;
  std::list<Worker> workers_;
  std::map<std::uint64_t, int> open_fds_;
  std::map<telemetry::DeviceId, std::unique_ptr<DeviceSinks>> sinks_;
  std::vector<SessionResult> results_;
  std::function<void(const SessionResult&)> callback_;
  std::uint64_t next_session_ = 0;
};

struct EmulatorOptions {
  std::string host = "127.0.0.1";
  std::uint16_t port = 7070;
  std::size_t samples_per_frame = 64;
  std::uint64_t first_seq = 1;
};

struct EmulatorResult {
  bool ok = false;
  std::string error;
  nlohmann::json report;
  std::size_t frames = 0;
};

/// Sensor emulator: seals the channels into frames (round-robin across
/// channels, samples_per_frame each), streams them, sends the terminator and
/// waits for the server's reply. Throws Io on connection failure.
EmulatorResult emulate(const telemetry::DeviceKey& key,
                       const std::vector<std::pair<Channel, std::vector<TimedSample>>>& channels,
                       const EmulatorOptions& opts);

/// Sends pre-built frame bytes as-is; used to inject tampered frames.
EmulatorResult send_frames(const std::vector<std::vector<std::uint8_t>>& frames, const std::string& host,
                           std::uint16_t port);

}  // namespace mywear::pipeline
