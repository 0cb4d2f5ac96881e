#include "mywear/service.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <sys/time.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <iostream>

#include "mywear/error.hpp"

namespace mywear::pipeline {
namespace {

[[noreturn]] void throw_io(const std::string& what) {
  throw Error(Errc::Io, what + ": " + std::strerror(errno));
}

bool write_all(int fd, const std::uint8_t* data, std::size_t n) {
  while (n > 0) {
    const ssize_t w = ::send(fd, data, n, MSG_NOSIGNAL);
    if (w < 0 && errno == EINTR) continue;
    if (w <= 0) return false;
    data += w;
    n -= static_cast<std::size_t>(w);
  }
  return true;
}

bool read_exact(int fd, std::uint8_t* data, std::size_t n) {
  while (n > 0) {
    const ssize_t r = ::recv(fd, data, n, 0);
    if (r < 0 && errno == EINTR) continue;
    if (r <= 0) return false;
    data += r;
    n -= static_cast<std::size_t>(r);
  }
  return true;
}

void put_u32(std::uint8_t* p, std::uint32_t v) {
  p[0] = static_cast<std::uint8_t>(v >> 24);
  p[1] = static_cast<std::uint8_t>(v >> 16);
  p[2] = static_cast<std::uint8_t>(v >> 8);
  p[3] = static_cast<std::uint8_t>(v);
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | p[3];
}

bool send_message(int fd, std::span<const std::uint8_t> body) {
  std::uint8_t len[4];
  put_u32(len, static_cast<std::uint32_t>(body.size()));
  return write_all(fd, len, 4) && write_all(fd, body.data(), body.size());
}

void send_reply(int fd, bool ok, const std::string& body) {
  std::vector<std::uint8_t> msg(5 + body.size());
  msg[0] = ok ? 0 : 1;
  put_u32(msg.data() + 1, static_cast<std::uint32_t>(body.size()));
  std::memcpy(msg.data() + 5, body.data(), body.size());
  write_all(fd, msg.data(), msg.size());
}

sockaddr_in parse_address(const std::string& address) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos) throw Error(Errc::InvalidConfig, "listen address needs host:port: " + address);
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  const std::string host = address.substr(0, colon);
  if (::inet_pton(AF_INET, host.c_str(), &sa.sin_addr) != 1) {
    throw Error(Errc::InvalidConfig, "not an IPv4 address: " + host);
  }
  int port = 0;
  try {
    port = std::stoi(address.substr(colon + 1));
  } catch (const std::exception&) {
    port = -1;
  }
  if (port < 0 || port > 65535) throw Error(Errc::InvalidConfig, "bad port in " + address);
  sa.sin_port = htons(static_cast<std::uint16_t>(port));
  return sa;
}

int connect_to(const std::string& host, std::uint16_t port) {
  const sockaddr_in sa = parse_address(host + ":" + std::to_string(port));
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw_io("socket");
  if (::connect(fd, reinterpret_cast<const sockaddr*>(&sa), sizeof sa) != 0) {
    const int err = errno;
    ::close(fd);
    errno = err;
    throw_io("connect " + host + ":" + std::to_string(port));
  }
  const int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  return fd;
}

EmulatorResult read_reply(int fd, EmulatorResult result) {
  std::uint8_t head[5];
  if (!read_exact(fd, head, 5)) {
    result.error = "connection closed without a reply";
    return result;
  }
  std::string body(get_u32(head + 1), '\0');
  if (!read_exact(fd, reinterpret_cast<std::uint8_t*>(body.data()), body.size())) {
    result.error = "truncated reply";
    return result;
  }
  result.ok = head[0] == 0;
  if (result.ok) {
    result.report = nlohmann::json::parse(body);
  } else {
    result.error = body;
  }
  return result;
}

}  // namespace

IngestService::IngestService(PipelineConfig cfg, const telemetry::KeyStore& keys,
                             std::shared_ptr<const beats::BeatPredictor> model)
    : cfg_(std::move(cfg)), keys_(keys), model_(std::move(model)) {
  cfg_.validate();
}

IngestService::~IngestService() { stop(); }

void IngestService::start() {
  const sockaddr_in sa = parse_address(cfg_.listen_address);
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw_io("socket");
  const int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(listen_fd_, reinterpret_cast<const sockaddr*>(&sa), sizeof sa) != 0) throw_io("bind " + cfg_.listen_address);
  if (::listen(listen_fd_, 64) != 0) throw_io("listen");
  sockaddr_in bound{};
  socklen_t len = sizeof bound;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);
  running_ = true;
  acceptor_ = std::thread([this] { accept_loop(); });
}

void IngestService::stop() {
  if (!running_.exchange(false)) return;
  ::shutdown(listen_fd_, SHUT_RDWR);
  ::close(listen_fd_);
  if (acceptor_.joinable()) acceptor_.join();
  {
    std::lock_guard lock(mu_);
    for (const auto& [id, fd] : open_fds_) ::shutdown(fd, SHUT_RDWR);
  }
  reap(true);
}

void IngestService::on_session(std::function<void(const SessionResult&)> cb) {
  std::lock_guard lock(mu_);
  callback_ = std::move(cb);
}

std::vector<SessionResult> IngestService::results() const {
  std::lock_guard lock(mu_);
  return results_;
}

void IngestService::reap(bool all) {
  std::list<Worker> finished;
  {
    std::lock_guard lock(mu_);
    for (auto it = workers_.begin(); it != workers_.end();) {
      if (all || it->done->load()) {
        finished.splice(finished.end(), workers_, it++);
      } else {
        ++it;
      }
    }
  }
  for (auto& w : finished) w.thread.join();
}

void IngestService::accept_loop() {
  while (running_) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      if (!running_) break;
      std::clog << "ingest: accept failed: " << std::strerror(errno) << '\n';
      continue;
    }
    reap(false);
    auto done = std::make_shared<std::atomic<bool>>(false);
    std::lock_guard lock(mu_);
    const std::uint64_t id = next_session_++;
    open_fds_[id] = fd;
    workers_.push_back({std::thread([this, fd, id, done] {
                          run_session(fd, id);
                          done->store(true);
                        }),
                        done});
  }
}

void IngestService::run_session(int fd, std::uint64_t id) {
  SessionResult result = handle(fd, id);
  if (!result.ok) std::clog << "ingest: session " << id << ": " << result.error << '\n';
  {
    std::lock_guard lock(mu_);
    open_fds_.erase(id);
  }
  ::close(fd);
  std::function<void(const SessionResult&)> cb;
  {
    std::lock_guard lock(mu_);
    results_.push_back(result);
    cb = callback_;
  }
  if (cb) cb(result);
}

std::span<AlertSink* const> IngestService::sinks_for(telemetry::DeviceId device) {
  std::lock_guard lock(mu_);
  auto& entry = sinks_[device];
  if (!entry) {
    entry = std::make_unique<DeviceSinks>();
    entry->owned = make_sinks(cfg_, device);
    for (auto& s : entry->owned) entry->raw.push_back(s.get());
  }
  return entry->raw;
}

SessionResult IngestService::handle(int fd, std::uint64_t id) {
  SessionResult result;
  result.session = id;
  telemetry::FrameReceiver receiver(keys_, guard_);
  std::unique_ptr<StreamAnalyzer> analyzer;
  std::unique_ptr<AlertDispatcher> dispatcher;
  std::vector<std::uint8_t> frame;

  auto fail = [&](const std::string& message) {
    result.ok = false;
    result.error = message;
    send_reply(fd, false, message);
    // Drain what the client still sends so closing does not reset the
    // connection before it reads the reply.
    ::shutdown(fd, SHUT_WR);
    timeval tv{2, 0};
    ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
    std::uint8_t sink[4096];
    while (::recv(fd, sink, sizeof sink, 0) > 0) {
    }
    return result;
  };

  try {
    for (;;) {
      std::uint8_t len_bytes[4];
      if (!read_exact(fd, len_bytes, 4)) return fail("connection closed before end of stream");
      const std::uint32_t len = get_u32(len_bytes);
      if (len == 0) break;
      if (len > kMaxFrameBytes) return fail("frame of " + std::to_string(len) + " bytes exceeds limit");
      frame.resize(len);
      if (!read_exact(fd, frame.data(), len)) return fail("connection closed mid-frame");

      const auto opened = receiver.open(frame);
      if (!analyzer) {
        result.device = opened.device_id;
        PipelineConfig cfg = cfg_;
        cfg.device_id = opened.device_id.hex();
        analyzer = std::make_unique<StreamAnalyzer>(cfg, opened.device_id, model_);
        dispatcher = std::make_unique<AlertDispatcher>(sinks_for(opened.device_id), retry_policy(cfg_));
      } else if (opened.device_id != *result.device) {
        return fail("MalformedFrame: device changed within a session");
      }
      const auto samples = telemetry::decode_samples(opened.plaintext);
      analyzer->push(opened.channel, samples);
      dispatcher->dispatch(analyzer->drain_alerts());
      ++result.frames;
    }
    if (!analyzer) return fail("no frames received");
    auto report = analyzer->finish();
    dispatcher->dispatch(analyzer->drain_alerts());
    dispatcher->annotate(report);
    report["generated_at_ms"] = now_ms();
    const auto dir = std::filesystem::path(cfg_.output_dir) / result.device->hex();
    write_bundle(dir, report, cfg_.write_plots ? analyzer->plots() : std::span<const PlotSeries>{},
                 "report-session-" + std::to_string(id) + ".json");
    result.ok = true;
    result.report = std::move(report);
    send_reply(fd, true, result.report.dump());
    return result;
  } catch (const Error& e) {
    return fail(e.what());
  } catch (const std::exception& e) {
    return fail(std::string("internal error: ") + e.what());
  }
}

EmulatorResult emulate(const telemetry::DeviceKey& key,
                       const std::vector<std::pair<Channel, std::vector<TimedSample>>>& channels,
                       const EmulatorOptions& opts) {
  if (opts.samples_per_frame == 0 || opts.samples_per_frame * telemetry::kSampleRecordBytes > telemetry::kMaxPayloadBytes) {
    throw Error(Errc::OversizePayload, "samples_per_frame " + std::to_string(opts.samples_per_frame));
  }
  telemetry::FrameSender sender(key);
  std::vector<std::vector<std::uint8_t>> frames;
  std::vector<std::size_t> cursor(channels.size(), 0);
  std::uint64_t seq = opts.first_seq;
  for (bool progressed = true; progressed;) {
    progressed = false;
    for (std::size_t c = 0; c < channels.size(); ++c) {
      const auto& samples = channels[c].second;
      if (cursor[c] >= samples.size()) continue;
      const std::size_t n = std::min(opts.samples_per_frame, samples.size() - cursor[c]);
      const auto payload = telemetry::encode_samples(std::span(samples).subspan(cursor[c], n));
      frames.push_back(telemetry::encode_frame(sender.seal(seq++, channels[c].first, payload)));
      cursor[c] += n;
      progressed = true;
    }
  }
  return send_frames(frames, opts.host, opts.port);
}

EmulatorResult send_frames(const std::vector<std::vector<std::uint8_t>>& frames, const std::string& host,
                           std::uint16_t port) {
  const int fd = connect_to(host, port);
  EmulatorResult result;
  for (const auto& f : frames) {
    // The server may reject a frame and close early; its reply explains why.
    if (!send_message(fd, f)) break;
    ++result.frames;
  }
  const std::uint8_t end[4] = {0, 0, 0, 0};
  write_all(fd, end, 4);
  result = read_reply(fd, std::move(result));
  ::close(fd);
  return result;
}

}  // namespace mywear::pipeline
