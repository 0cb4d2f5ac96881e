#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mywear/signal.hpp"

namespace mywear::csv {

/// One channel file: header `t_ms,value`, then one sample per line.
struct TimedColumn {
  std::vector<std::int64_t> t_ms;
  std::vector<double> values;
};

TimedColumn read_channel(const std::filesystem::path& path);
void write_channel(const std::filesystem::path& path, const TimedColumn& column);

/// Mean sampling rate implied by the timestamps, 1000 * (n - 1) / (t_last - t_first).
double infer_rate_hz(const std::vector<std::int64_t>& t_ms);

/// Reads a channel file and builds a validated series. The rate is inferred
/// from the timestamps unless given.
SampleSeries read_series(const std::filesystem::path& path, Channel channel,
                         std::optional<double> rate_hz = std::nullopt);

/// IMU file: header `t_ms,ax,ay,az` with accelerations in g.
std::vector<ImuSample> read_imu(const std::filesystem::path& path);
void write_imu(const std::filesystem::path& path, const std::vector<ImuSample>& samples);

/// Splits a line on commas and parses every field as a double. Returns
/// nullopt on any parse failure.
std::optional<std::vector<double>> parse_numeric_row(const std::string& line);

}  // namespace mywear::csv
