#include "mywear/csv_io.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>

#include "mywear/error.hpp"

namespace mywear::csv {
namespace {

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}

bool is_header(const std::string& line) {
  for (char c : line) {
    if (std::isalpha(static_cast<unsigned char>(c)) && c != 'e' && c != 'E') return true;
  }
  return false;
}

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
  return s.substr(i);
}

}  // namespace

std::optional<std::vector<double>> parse_numeric_row(const std::string& line) {
  std::vector<double> out;
  const char* p = line.data();
  const char* end = p + line.size();
  while (true) {
    while (p < end && (*p == ' ' || *p == '\t')) ++p;
    double v = 0.0;
    auto [next, ec] = std::from_chars(p, end, v);
    if (ec != std::errc{}) return std::nullopt;
    out.push_back(v);
    p = next;
    while (p < end && (*p == ' ' || *p == '\t' || *p == '\r')) ++p;
    if (p == end) break;
    if (*p != ',') return std::nullopt;
    ++p;
  }
  return out;
}

TimedColumn read_channel(const std::filesystem::path& path) {
  auto in = open_in(path);
  TimedColumn col;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    if (lineno == 1 && is_header(line)) continue;
    auto row = parse_numeric_row(line);
    if (!row || row->size() != 2) {
      throw Error(Errc::MalformedRow, path.string() + ":" + std::to_string(lineno) + " expected `t_ms,value`");
    }
    col.t_ms.push_back(static_cast<std::int64_t>(std::llround((*row)[0])));
    col.values.push_back((*row)[1]);
  }
  return col;
}

void write_channel(const std::filesystem::path& path, const TimedColumn& column) {
  auto out = open_out(path);
  out << "t_ms,value\n";
  for (std::size_t i = 0; i < column.values.size(); ++i) {
    out << column.t_ms[i] << ',' << column.values[i] << '\n';
  }
}

double infer_rate_hz(const std::vector<std::int64_t>& t_ms) {
  if (t_ms.size() < 2 || t_ms.back() <= t_ms.front()) {
    throw Error(Errc::NonPositiveRate, "cannot infer sampling rate from timestamps");
  }
  return 1000.0 * static_cast<double>(t_ms.size() - 1) / static_cast<double>(t_ms.back() - t_ms.front());
}

SampleSeries read_series(const std::filesystem::path& path, Channel channel, std::optional<double> rate_hz) {
  auto col = read_channel(path);
  if (col.values.empty()) throw Error(Errc::EmptySignal, path.string() + " has no samples");
  const double rate = rate_hz ? *rate_hz : infer_rate_hz(col.t_ms);
  return make_sample_series(channel, rate, col.t_ms.front(), std::move(col.values));
}

std::vector<ImuSample> read_imu(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<ImuSample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty()) continue;
    if (lineno == 1 && is_header(line)) continue;
    auto row = parse_numeric_row(line);
    if (!row || row->size() != 4) {
      throw Error(Errc::MalformedRow, path.string() + ":" + std::to_string(lineno) + " expected `t_ms,ax,ay,az`");
    }
    for (double v : *row) {
      if (!std::isfinite(v)) {
        throw Error(Errc::NonFiniteSample, path.string() + ":" + std::to_string(lineno));
      }
    }
    out.push_back({static_cast<std::int64_t>(std::llround((*row)[0])), (*row)[1], (*row)[2], (*row)[3]});
  }
  return out;
}

void write_imu(const std::filesystem::path& path, const std::vector<ImuSample>& samples) {
  auto out = open_out(path);
  out << "t_ms,ax,ay,az\n";
  for (const auto& s : samples) out << s.t_ms << ',' << s.ax << ',' << s.ay << ',' << s.az << '\n';
}

}  // namespace mywear::csv
