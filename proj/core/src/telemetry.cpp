#include "mywear/telemetry.hpp"

#include <openssl/evp.h>
#include <openssl/rand.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <memory>
#include <nlohmann/json.hpp>

#include "mywear/digest.hpp"
#include "mywear/error.hpp"

namespace mywear::telemetry {
namespace {

template <std::size_t N>
void put_be(std::uint8_t* out, std::uint64_t v) {
  for (std::size_t i = 0; i < N; ++i) out[i] = static_cast<std::uint8_t>(v >> (8 * (N - 1 - i)));
}

template <std::size_t N>
std::uint64_t get_be(const std::uint8_t* in) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < N; ++i) v = (v << 8) | in[i];
  return v;
}

int hex_digit(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

template <std::size_t N>
std::array<std::uint8_t, N> parse_hex(std::string_view hex, const char* what) {
  if (hex.size() != 2 * N) throw Error(Errc::InvalidConfig, std::string(what) + " must be " + std::to_string(2 * N) + " hex digits");
  std::array<std::uint8_t, N> out{};
  for (std::size_t i = 0; i < N; ++i) {
    const int hi = hex_digit(hex[2 * i]), lo = hex_digit(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) throw Error(Errc::InvalidConfig, std::string(what) + " is not hex");
    out[i] = static_cast<std::uint8_t>(hi * 16 + lo);
  }
  return out;
}

struct CipherCtxDeleter {
  void operator()(EVP_CIPHER_CTX* ctx) const noexcept { EVP_CIPHER_CTX_free(ctx); }
};
using CipherCtx = std::unique_ptr<EVP_CIPHER_CTX, CipherCtxDeleter>;

CipherCtx new_ctx() {
  CipherCtx ctx(EVP_CIPHER_CTX_new());
  if (!ctx) throw Error(Errc::Io, "EVP_CIPHER_CTX_new failed");
  return ctx;
}

}  // namespace

DeviceId DeviceId::from_u64(std::uint64_t v) noexcept {
  DeviceId id;
  put_be<8>(id.bytes.data(), v);
  return id;
}

DeviceId DeviceId::from_hex(std::string_view hex) { return DeviceId{parse_hex<8>(hex, "device id")}; }

std::uint64_t DeviceId::to_u64() const noexcept { return get_be<8>(bytes.data()); }

std::string DeviceId::hex() const { return to_hex(bytes); }

void SystemRandom::fill(std::span<std::uint8_t> out) {
  if (RAND_bytes(out.data(), static_cast<int>(out.size())) != 1) {
    throw Error(Errc::RngFailure, "RAND_bytes failed");
  }
}

DeviceKey KeyStore::pair(DeviceId device, RandomSource& rng, std::int64_t now_ms) {
  std::lock_guard lock(mu_);
  if (keys_.contains(device)) throw Error(Errc::DuplicateDevice, "device " + device.hex() + " is already paired");
  DeviceKey k;
  k.device_id = device;
  k.issued_at_ms = now_ms;
  rng.fill(k.key);
  keys_.emplace(device, k);
  return k;
}

void KeyStore::insert(const DeviceKey& key) {
  std::lock_guard lock(mu_);
  keys_[key.device_id] = key;
}

bool KeyStore::revoke(DeviceId device) {
  std::lock_guard lock(mu_);
  return keys_.erase(device) > 0;
}

std::optional<DeviceKey> KeyStore::find(DeviceId device) const {
  std::lock_guard lock(mu_);
  const auto it = keys_.find(device);
  if (it == keys_.end()) return std::nullopt;
  return it->second;
}

std::size_t KeyStore::size() const {
  std::lock_guard lock(mu_);
  return keys_.size();
}

void KeyStore::save(const std::filesystem::path& path) const {
  nlohmann::json devices = nlohmann::json::array();
  {
    std::lock_guard lock(mu_);
    for (const auto& [id, k] : keys_) {
      devices.push_back({{"device_id", id.hex()}, {"key", to_hex(k.key)}, {"issued_at_ms", k.issued_at_ms}});
    }
  }
  std::ofstream out(path);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out << nlohmann::json{{"version", 1}, {"devices", devices}}.dump(2) << '\n';
}

void KeyStore::load_into(KeyStore& store, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  try {
    const auto doc = nlohmann::json::parse(in);
    for (const auto& d : doc.at("devices")) {
      DeviceKey k;
      k.device_id = DeviceId::from_hex(d.at("device_id").get<std::string>());
      k.key = parse_hex<kKeyBytes>(d.at("key").get<std::string>(), "key");
      k.issued_at_ms = d.value("issued_at_ms", std::int64_t{0});
      store.insert(k);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidConfig, path.string() + ": " + e.what());
  }
}

std::array<std::uint8_t, kHeaderBytes> encode_header(const FrameHeader& h) {
  std::array<std::uint8_t, kHeaderBytes> out{};
  std::size_t at = 0;
  out[at++] = h.version;
  std::copy(h.device_id.bytes.begin(), h.device_id.bytes.end(), out.begin() + at);
  at += 8;
  put_be<8>(out.data() + at, h.seq);
  at += 8;
  std::copy(h.nonce.begin(), h.nonce.end(), out.begin() + static_cast<std::ptrdiff_t>(at));
  at += kNonceBytes;
  out[at++] = h.channel;
  put_be<4>(out.data() + at, h.payload_len);
  return out;
}

std::vector<std::uint8_t> encode_frame(const TelemetryFrame& frame) {
  const auto header = encode_header(frame.header);
  std::vector<std::uint8_t> out(kHeaderBytes + frame.ciphertext.size() + kTagBytes);
  auto it = std::copy(header.begin(), header.end(), out.begin());
  it = std::copy(frame.ciphertext.begin(), frame.ciphertext.end(), it);
  std::copy(frame.tag.begin(), frame.tag.end(), it);
  return out;
}

TelemetryFrame decode_frame(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderBytes + kTagBytes) {
    throw Error(Errc::MalformedFrame, "frame of " + std::to_string(bytes.size()) + " bytes is truncated");
  }
  TelemetryFrame f;
  const std::uint8_t* p = bytes.data();
  f.header.version = p[0];
  if (f.header.version != kFrameVersion) {
    throw Error(Errc::MalformedFrame, "unsupported frame version " + std::to_string(f.header.version));
  }
  std::copy(p + 1, p + 9, f.header.device_id.bytes.begin());
  f.header.seq = get_be<8>(p + 9);
  std::copy(p + 17, p + 17 + kNonceBytes, f.header.nonce.begin());
  f.header.channel = p[29];
  f.header.payload_len = static_cast<std::uint32_t>(get_be<4>(p + 30));
  if (f.header.payload_len > kMaxPayloadBytes ||
      bytes.size() != kHeaderBytes + f.header.payload_len + kTagBytes) {
    throw Error(Errc::MalformedFrame, "payload length field does not match frame size");
  }
  f.ciphertext.assign(p + kHeaderBytes, p + kHeaderBytes + f.header.payload_len);
  std::copy(p + kHeaderBytes + f.header.payload_len, p + bytes.size(), f.tag.begin());
  return f;
}

std::array<std::uint8_t, kNonceBytes> derive_nonce(DeviceId device, std::uint64_t seq) {
  std::array<std::uint8_t, kNonceBytes> n{};
  std::copy(device.bytes.begin(), device.bytes.begin() + 4, n.begin());
  put_be<8>(n.data() + 4, seq);
  return n;
}

TelemetryFrame encrypt_frame(const DeviceKey& key, std::uint64_t seq, Channel channel,
                             std::span<const std::uint8_t> plaintext) {
  if (plaintext.size() > kMaxPayloadBytes) {
    throw Error(Errc::OversizePayload, std::to_string(plaintext.size()) + " bytes exceeds the 64 KiB cap");
  }
  TelemetryFrame f;
  f.header.device_id = key.device_id;
  f.header.seq = seq;
  f.header.nonce = derive_nonce(key.device_id, seq);
  f.header.channel = static_cast<std::uint8_t>(channel);
  f.header.payload_len = static_cast<std::uint32_t>(plaintext.size());
  const auto aad = encode_header(f.header);

  auto ctx = new_ctx();
  int len = 0;
  f.ciphertext.resize(plaintext.size());
  if (EVP_EncryptInit_ex(ctx.get(), EVP_aes_128_gcm(), nullptr, nullptr, nullptr) != 1 ||
      EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_IVLEN, static_cast<int>(kNonceBytes), nullptr) != 1 ||
      EVP_EncryptInit_ex(ctx.get(), nullptr, nullptr, key.key.data(), f.header.nonce.data()) != 1 ||
      EVP_EncryptUpdate(ctx.get(), nullptr, &len, aad.data(), static_cast<int>(aad.size())) != 1 ||
      EVP_EncryptUpdate(ctx.get(), f.ciphertext.data(), &len, plaintext.data(), static_cast<int>(plaintext.size())) != 1 ||
      EVP_EncryptFinal_ex(ctx.get(), f.ciphertext.data() + len, &len) != 1 ||
      EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_GET_TAG, static_cast<int>(kTagBytes), f.tag.data()) != 1) {
    throw Error(Errc::Io, "AES-128-GCM encryption failed");
  }
  return f;
}

DecryptedFrame decrypt_frame(const DeviceKey& key, const TelemetryFrame& frame) {
  const auto& h = frame.header;
  if (h.version != kFrameVersion || h.payload_len != frame.ciphertext.size()) {
    throw Error(Errc::MalformedFrame, "inconsistent frame header");
  }
  if (h.device_id != key.device_id) throw Error(Errc::AuthenticationFailure, "frame is not for this key's device");
  if (h.nonce != derive_nonce(h.device_id, h.seq)) throw Error(Errc::AuthenticationFailure, "nonce does not match seq");
  const auto channel = channel_from_byte(h.channel);
  if (!channel) throw Error(Errc::MalformedFrame, "unknown channel " + std::to_string(h.channel));

  const auto aad = encode_header(h);
  auto ctx = new_ctx();
  std::vector<std::uint8_t> plain(frame.ciphertext.size());
  auto tag = frame.tag;
  int len = 0;
  if (EVP_DecryptInit_ex(ctx.get(), EVP_aes_128_gcm(), nullptr, nullptr, nullptr) != 1 ||
      EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_IVLEN, static_cast<int>(kNonceBytes), nullptr) != 1 ||
      EVP_DecryptInit_ex(ctx.get(), nullptr, nullptr, key.key.data(), h.nonce.data()) != 1 ||
      EVP_DecryptUpdate(ctx.get(), nullptr, &len, aad.data(), static_cast<int>(aad.size())) != 1 ||
      EVP_DecryptUpdate(ctx.get(), plain.data(), &len, frame.ciphertext.data(),
                        static_cast<int>(frame.ciphertext.size())) != 1 ||
      EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_TAG, static_cast<int>(kTagBytes), tag.data()) != 1) {
    throw Error(Errc::Io, "AES-128-GCM setup failed");
  }
  if (EVP_DecryptFinal_ex(ctx.get(), plain.data() + len, &len) != 1) {
    std::fill(plain.begin(), plain.end(), 0);
    throw Error(Errc::AuthenticationFailure, "authentication tag mismatch");
  }
  return {h.device_id, h.seq, *channel, std::move(plain)};
}

TelemetryFrame FrameSender::seal(std::uint64_t seq, Channel channel, std::span<const std::uint8_t> plaintext) {
  if (last_seq_ && seq <= *last_seq_) {
    throw Error(Errc::NonceReuse, "seq " + std::to_string(seq) + " does not advance past " + std::to_string(*last_seq_));
  }
  auto frame = encrypt_frame(key_, seq, channel, plaintext);
  last_seq_ = seq;
  return frame;
}

void SequenceGuard::check(DeviceId device, std::uint64_t seq) const {
  std::lock_guard lock(mu_);
  const auto it = last_.find(device);
  if (it != last_.end() && seq <= it->second) {
    throw Error(Errc::ReplayedSequence, "seq " + std::to_string(seq) + " <= last accepted " + std::to_string(it->second));
  }
}

void SequenceGuard::commit(DeviceId device, std::uint64_t seq) {
  std::lock_guard lock(mu_);
  auto [it, inserted] = last_.try_emplace(device, seq);
  if (inserted) return;
  if (seq <= it->second) {
    throw Error(Errc::ReplayedSequence, "seq " + std::to_string(seq) + " <= last accepted " + std::to_string(it->second));
  }
  it->second = seq;
}

DecryptedFrame FrameReceiver::open(std::span<const std::uint8_t> bytes) {
  const auto frame = decode_frame(bytes);
  const auto key = keys_.find(frame.header.device_id);
  if (!key) throw Error(Errc::UnknownDevice, "device " + frame.header.device_id.hex() + " is not paired");
  guard_.check(frame.header.device_id, frame.header.seq);
  auto out = decrypt_frame(*key, frame);
  guard_.commit(out.device_id, out.seq);
  return out;
}

std::vector<std::uint8_t> encode_samples(std::span<const TimedSample> samples) {
  std::vector<std::uint8_t> out(samples.size() * kSampleRecordBytes);
  std::uint8_t* p = out.data();
  for (const auto& s : samples) {
    const auto t = static_cast<std::uint64_t>(s.t_ms);
    for (int i = 0; i < 8; ++i) *p++ = static_cast<std::uint8_t>(t >> (8 * i));
    const auto v = std::bit_cast<std::uint32_t>(s.value);
    for (int i = 0; i < 4; ++i) *p++ = static_cast<std::uint8_t>(v >> (8 * i));
  }
  return out;
}

std::vector<TimedSample> decode_samples(std::span<const std::uint8_t> payload) {
  if (payload.size() % kSampleRecordBytes != 0) {
    throw Error(Errc::MalformedFrame, "payload of " + std::to_string(payload.size()) + " bytes is not whole records");
  }
  std::vector<TimedSample> out(payload.size() / kSampleRecordBytes);
  const std::uint8_t* p = payload.data();
  for (auto& s : out) {
    std::uint64_t t = 0;
    for (int i = 0; i < 8; ++i) t |= static_cast<std::uint64_t>(*p++) << (8 * i);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(*p++) << (8 * i);
    s.t_ms = static_cast<std::int64_t>(t);
    s.value = std::bit_cast<float>(v);
  }
  return out;
}

}  // namespace mywear::telemetry
