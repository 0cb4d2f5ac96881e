#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mywear/signal.hpp"

namespace mywear::telemetry {

struct DeviceId {
  std::array<std::uint8_t, 8> bytes{};

  static DeviceId from_u64(std::uint64_t v) noexcept;
  /// Accepts exactly 16 hex digits. Throws InvalidConfig.
  static DeviceId from_hex(std::string_view hex);
  std::uint64_t to_u64() const noexcept;
  std::string hex() const;
  auto operator<=>(const DeviceId&) const = default;
};

inline constexpr std::size_t kKeyBytes = 16;
inline constexpr std::size_t kNonceBytes = 12;
inline constexpr std::size_t kTagBytes = 16;
inline constexpr std::size_t kHeaderBytes = 1 + 8 + 8 + kNonceBytes + 1 + 4;  // 34
inline constexpr std::size_t kMaxPayloadBytes = 64 * 1024;
inline constexpr std::uint8_t kFrameVersion = 1;

struct DeviceKey {
  std::array<std::uint8_t, kKeyBytes> key{};
  DeviceId device_id;
  std::int64_t issued_at_ms = 0;
};

class RandomSource {
 public:
  virtual ~RandomSource() = default;
  /// Throws RngFailure.
  virtual void fill(std::span<std::uint8_t> out) = 0;
};

/// OS CSPRNG via OpenSSL.
class SystemRandom final : public RandomSource {
 public:
  void fill(std::span<std::uint8_t> out) override;
};

/// Paired device keys. Mutations are serialised by an internal mutex.
class KeyStore {
 public:
  KeyStore() = default;
  KeyStore(const KeyStore&) = delete;
  KeyStore& operator=(const KeyStore&) = delete;

  /// Generates a fresh key for a new device. Throws DuplicateDevice, RngFailure.
  DeviceKey pair(DeviceId device, RandomSource& rng, std::int64_t now_ms);
  void insert(const DeviceKey& key);
  bool revoke(DeviceId device);
  std::optional<DeviceKey> find(DeviceId device) const;
  std::size_t size() const;

  /// JSON file: {"version":1,"devices":[{"device_id":hex,"key":hex,"issued_at_ms":n}]}
  void save(const std::filesystem::path& path) const;
  static void load_into(KeyStore& store, const std::filesystem::path& path);

 private:
  mutable std::mutex mu_;
  std::map<DeviceId, DeviceKey> keys_;
};

struct FrameHeader {
  std::uint8_t version = kFrameVersion;
  DeviceId device_id;
  std::uint64_t seq = 0;
  std::array<std::uint8_t, kNonceBytes> nonce{};
  std::uint8_t channel = 0;
  std::uint32_t payload_len = 0;
};

/// Wire layout, all multi-byte integers big-endian:
///   version u8 | device_id 8 | seq u64 | nonce 12 | channel u8 |
///   payload_len u32 | ciphertext payload_len | auth_tag 16
/// The 34 header bytes are the AES-GCM associated data.
struct TelemetryFrame {
  FrameHeader header;
  std::vector<std::uint8_t> ciphertext;
  std::array<std::uint8_t, kTagBytes> tag{};
};

std::array<std::uint8_t, kHeaderBytes> encode_header(const FrameHeader& h);
std::vector<std::uint8_t> encode_frame(const TelemetryFrame& frame);
/// Throws MalformedFrame on truncation, length mismatch or bad version.
TelemetryFrame decode_frame(std::span<const std::uint8_t> bytes);

/// Nonce = first 4 bytes of the device id followed by the big-endian seq.
std::array<std::uint8_t, kNonceBytes> derive_nonce(DeviceId device, std::uint64_t seq);

/// AES-128-GCM seal. Throws OversizePayload.
TelemetryFrame encrypt_frame(const DeviceKey& key, std::uint64_t seq, Channel channel,
                             std::span<const std::uint8_t> plaintext);

struct DecryptedFrame {
  DeviceId device_id;
  std::uint64_t seq = 0;
  Channel channel = Channel::Ecg;
  std::vector<std::uint8_t> plaintext;
};

/// Verifies and opens a frame. Stateless; replay checks live in
/// SequenceGuard. Throws AuthenticationFailure, MalformedFrame.
DecryptedFrame decrypt_frame(const DeviceKey& key, const TelemetryFrame& frame);

/// Sender side: refuses to seal with a sequence number that is not above
/// the last one used, so a nonce is never reused under one key.
class FrameSender {
 public:
  explicit FrameSender(DeviceKey key) : key_(key) {}
  /// Throws NonceReuse, OversizePayload.
  TelemetryFrame seal(std::uint64_t seq, Channel channel, std::span<const std::uint8_t> plaintext);
  std::optional<std::uint64_t> last_seq() const noexcept { return last_seq_; }

 private:
  DeviceKey key_;
  std::optional<std::uint64_t> last_seq_;
};

/// Highest accepted sequence number per device. Thread-safe.
class SequenceGuard {
 public:
  /// Throws ReplayedSequence if seq <= last accepted for the device.
  void check(DeviceId device, std::uint64_t seq) const;
  /// Atomically re-checks and records seq. Throws ReplayedSequence.
  void commit(DeviceId device, std::uint64_t seq);

 private:
  mutable std::mutex mu_;
  std::map<DeviceId, std::uint64_t> last_;
};

/// Receiving side: decode, look up the device key, authenticate, enforce
/// strictly increasing seq. Throws UnknownDevice plus decrypt_frame errors
/// and ReplayedSequence.
class FrameReceiver {
 public:
  FrameReceiver(const KeyStore& keys, SequenceGuard& guard) : keys_(keys), guard_(guard) {}
  DecryptedFrame open(std::span<const std::uint8_t> bytes);

 private:
  const KeyStore& keys_;
  SequenceGuard& guard_;
};

/// Payload encoding: consecutive 12-byte records, each an int64 LE t_ms
/// followed by an IEEE-754 float32 LE value.
inline constexpr std::size_t kSampleRecordBytes = 12;
std::vector<std::uint8_t> encode_samples(std::span<const TimedSample> samples);
/// Throws MalformedFrame if the length is not a multiple of 12.
std::vector<TimedSample> decode_samples(std::span<const std::uint8_t> payload);

}  // namespace mywear::telemetry
