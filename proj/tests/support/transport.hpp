#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "mywear/analyzer.hpp"
#include "mywear/service.hpp"

namespace fixtures {

struct DeviceRun {
  mywear::telemetry::DeviceKey key;
  std::vector<std::pair<mywear::Channel, std::vector<mywear::TimedSample>>> channels;
  mywear::pipeline::ReplayInputs inputs;
};

inline mywear::telemetry::DeviceKey fixed_key(std::uint64_t device) {
  mywear::telemetry::DeviceKey k;
  k.device_id = mywear::telemetry::DeviceId::from_u64(device);
  for (std::size_t i = 0; i < k.key.size(); ++i) k.key[i] = static_cast<std::uint8_t>(device * 31 + i * 7);
  return k;
}

inline DeviceRun device_run(const std::filesystem::path& dir, std::uint64_t device, double seconds = 75.0) {
  std::filesystem::create_directories(dir);
  const auto f = write_recording(dir, device, seconds);
  DeviceRun r;
  r.key = fixed_key(device);
  r.inputs = {f.ecg, f.imu, f.emg_bicep, f.emg_chest, f.temperature};
  r.channels = mywear::pipeline::load_replay_samples(r.inputs);
  return r;
}

// Runs a device's recording through replay with the matching config.
inline nlohmann::json replay_view(mywear::pipeline::PipelineConfig cfg, const DeviceRun& run,
                                  std::shared_ptr<const mywear::beats::BeatPredictor> model) {
  cfg.device_id = run.key.device_id.hex();
  return mywear::pipeline::analysis_view(mywear::pipeline::replay(cfg, run.inputs, std::move(model)).report);
}

}  // namespace fixtures
