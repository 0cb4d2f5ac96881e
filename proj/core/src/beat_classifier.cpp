#include "mywear/beat_classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <random>

#include "mywear/csv_io.hpp"
#include "mywear/digest.hpp"
#include "mywear/error.hpp"

namespace mywear::beats {

nn::Network build_network(const NetworkConfig& cfg, std::uint64_t seed) {
  nn::Network net({1, kBeatWindow});
  std::size_t channels = 1;
  for (std::size_t i = 0; i < cfg.conv_layers; ++i) {
    net.add(std::make_unique<nn::Conv1d>(channels, cfg.filters_per_layer, cfg.kernel_size, cfg.conv_stride));
    net.add(std::make_unique<nn::Relu>());
    net.add(std::make_unique<nn::MaxPool1d>(cfg.pool_size, cfg.pool_stride));
    channels = cfg.filters_per_layer;
  }
  std::size_t features = net.output_shape().size();
  for (std::size_t i = 0; i < cfg.fc_widths.size(); ++i) {
    net.add(std::make_unique<nn::Dense>(features, cfg.fc_widths[i]));
    features = cfg.fc_widths[i];
    if (i + 1 < cfg.fc_widths.size()) net.add(std::make_unique<nn::Relu>());
  }
  if (features != cfg.classes) {
    throw Error(Errc::ShapeMismatch, "last FC width " + std::to_string(features) + " != classes " +
                                         std::to_string(cfg.classes));
  }
  net.init_he_uniform(seed);
  return net;
}

std::vector<BeatSegment> load_mitbih_segments(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  std::vector<BeatSegment> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto row = csv::parse_numeric_row(line);
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (!row || row->size() != kBeatWindow + 1) {
      throw Error(Errc::MalformedRow, where + " expected " + std::to_string(kBeatWindow + 1) + " numeric columns");
    }
    BeatSegment seg;
    for (std::size_t i = 0; i < kBeatWindow; ++i) {
      const double v = (*row)[i];
      // The published corpus is min-max normalised; tolerate float noise only.
      if (!std::isfinite(v) || v < -1e-6 || v > 1.0 + 1e-6) {
        throw Error(Errc::MalformedRow, where + " value " + std::to_string(i) + " outside [0,1]");
      }
      seg.window[i] = std::clamp(v, 0.0, 1.0);
    }
    const double label = (*row)[kBeatWindow];
    const auto cls = beat_class_from_index(static_cast<int>(label));
    if (label != std::floor(label) || !cls) {
      throw Error(Errc::UnknownLabel, where + " label " + std::to_string(label));
    }
    seg.label = cls;
    out.push_back(seg);
  }
  return out;
}

void write_segments(const std::filesystem::path& path, std::span<const BeatSegment> segments) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out << std::setprecision(17);
  for (const auto& s : segments) {
    for (double v : s.window) out << v << ',';
    out << (s.label ? static_cast<int>(*s.label) : 0) << ".0\n";
  }
}

nn::LabeledSet to_labeled_set(std::span<const BeatSegment> segments) {
  nn::LabeledSet set;
  set.inputs.reserve(segments.size());
  set.labels.reserve(segments.size());
  for (const auto& s : segments) {
    if (!s.label) throw Error(Errc::UnknownLabel, "training segment is unlabeled");
    set.inputs.emplace_back(s.window.begin(), s.window.end());
    set.labels.push_back(static_cast<std::size_t>(*s.label));
  }
  return set;
}

namespace {

std::array<std::vector<std::size_t>, kBeatClassCount> by_class(std::span<const BeatSegment> segments,
                                                               std::mt19937_64& rng) {
  std::array<std::vector<std::size_t>, kBeatClassCount> idx;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (!segments[i].label) throw Error(Errc::UnknownLabel, "cannot stratify unlabeled segments");
    idx[static_cast<std::size_t>(*segments[i].label)].push_back(i);
  }
  for (auto& v : idx) std::shuffle(v.begin(), v.end(), rng);
  return idx;
}

}  // namespace

std::pair<std::vector<BeatSegment>, std::vector<BeatSegment>> stratified_split(std::span<const BeatSegment> segments,
                                                                               double train_fraction,
                                                                               std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto idx = by_class(segments, rng);
  std::vector<BeatSegment> train, test;
  for (const auto& cls : idx) {
    const auto cut = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(cls.size())));
    for (std::size_t k = 0; k < cls.size(); ++k) (k < cut ? train : test).push_back(segments[cls[k]]);
  }
  return {std::move(train), std::move(test)};
}

std::vector<BeatSegment> stratified_subset(std::span<const BeatSegment> segments, std::size_t count,
                                           std::uint64_t seed) {
  if (count >= segments.size()) return {segments.begin(), segments.end()};
  std::mt19937_64 rng(seed);
  const auto idx = by_class(segments, rng);
  // Largest-remainder quotas, so the shares round but the total is exact.
  std::array<std::size_t, kBeatClassCount> quota{};
  std::array<double, kBeatClassCount> remainder{};
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < kBeatClassCount; ++c) {
    const double exact = static_cast<double>(count) * static_cast<double>(idx[c].size()) /
                         static_cast<double>(segments.size());
    quota[c] = static_cast<std::size_t>(exact);
    remainder[c] = exact - static_cast<double>(quota[c]);
    assigned += quota[c];
  }
  std::array<std::size_t, kBeatClassCount> order{};
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < count; k = (k + 1) % kBeatClassCount) {
    const std::size_t c = order[k];
    if (quota[c] < idx[c].size()) {
      ++quota[c];
      ++assigned;
    }
  }
  std::vector<BeatSegment> out;
  for (std::size_t c = 0; c < kBeatClassCount; ++c) {
    for (std::size_t k = 0; k < quota[c]; ++k) out.push_back(segments[idx[c][k]]);
  }
  return out;
}

EvalReport metrics_from_confusion(const ConfusionMatrix& confusion) {
  EvalReport r;
  r.confusion = confusion;
  std::size_t trace = 0;
  for (std::size_t t = 0; t < kBeatClassCount; ++t) {
    for (std::size_t p = 0; p < kBeatClassCount; ++p) r.total += confusion[t][p];
    trace += confusion[t][t];
  }
  if (r.total == 0) return r;
  r.accuracy_pct = 100.0 * static_cast<double>(trace) / static_cast<double>(r.total);

  double psum = 0.0, rsum = 0.0;
  std::size_t counted = 0;
  for (std::size_t c = 0; c < kBeatClassCount; ++c) {
    const std::size_t tp = confusion[c][c];
    std::size_t fn = 0, fp = 0;
    for (std::size_t k = 0; k < kBeatClassCount; ++k) {
      if (k == c) continue;
      fn += confusion[c][k];
      fp += confusion[k][c];
    }
    const std::size_t tn = r.total - tp - fn - fp;
    r.support[c] = tp + fn;
    r.class_precision_pct[c] = tp + fp ? 100.0 * static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    r.class_recall_pct[c] = tp + fn ? 100.0 * static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    r.class_accuracy_pct[c] = 100.0 * static_cast<double>(tp + tn) / static_cast<double>(r.total);
    if (tp + fn + fp == 0) continue;
    psum += r.class_precision_pct[c];
    rsum += r.class_recall_pct[c];
    ++counted;
  }
  r.precision_pct = psum / static_cast<double>(counted);
  r.recall_pct = rsum / static_cast<double>(counted);
  return r;
}

EvalReport evaluate(const nn::Network& net, std::span<const BeatSegment> segments) {
  if (segments.empty()) throw Error(Errc::EmptyEvalSet, "no evaluation segments");
  ConfusionMatrix cm{};
  for (const auto& s : segments) {
    if (!s.label) throw Error(Errc::UnknownLabel, "evaluation segment is unlabeled");
    const auto pred = nn::argmax(net.logits(s.window));
    ++cm[static_cast<std::size_t>(*s.label)][pred];
  }
  return metrics_from_confusion(cm);
}

NetworkPredictor::NetworkPredictor(nn::Network net) : net_(std::move(net)) {
  if (net_.input_shape() != nn::Shape{1, kBeatWindow} || net_.num_classes() != kBeatClassCount) {
    throw Error(Errc::ShapeMismatch, "beat model must map 1x187 to 5 classes");
  }
  hash_ = sha256_hex(nn::serialize(net_));
}

std::array<double, kBeatClassCount> NetworkPredictor::predict(std::span<const double, kBeatWindow> window) const {
  const auto p = net_.predict_proba(window);
  std::array<double, kBeatClassCount> out{};
  std::copy(p.begin(), p.end(), out.begin());
  return out;
}

BeatWindows extract_beat_windows(const SampleSeries& ecg, std::span<const std::size_t> peaks) {
  BeatWindows out;
  if (peaks.empty()) return out;

  const double ratio = kBeatRateHz / ecg.rate_hz();
  const auto src = ecg.values();
  std::vector<double> resampled;
  std::vector<std::size_t> mapped;
  if (ecg.rate_hz() == kBeatRateHz) {
    resampled.assign(src.begin(), src.end());
    mapped.assign(peaks.begin(), peaks.end());
  } else {
    const auto m = static_cast<std::size_t>(std::floor(static_cast<double>(src.size() - 1) * ratio)) + 1;
    resampled.resize(m);
    for (std::size_t k = 0; k < m; ++k) {
      const double pos = static_cast<double>(k) / ratio;
      const auto i = std::min(static_cast<std::size_t>(pos), src.size() - 1);
      const double frac = pos - static_cast<double>(i);
      resampled[k] = i + 1 < src.size() ? src[i] + frac * (src[i + 1] - src[i]) : src[i];
    }
    for (auto p : peaks) mapped.push_back(static_cast<std::size_t>(std::llround(static_cast<double>(p) * ratio)));
  }

  std::size_t span_len = kBeatWindow;
  if (mapped.size() >= 2) {
    std::vector<double> rr;
    for (std::size_t k = 0; k + 1 < mapped.size(); ++k) rr.push_back(static_cast<double>(mapped[k + 1] - mapped[k]));
    std::nth_element(rr.begin(), rr.begin() + static_cast<std::ptrdiff_t>(rr.size() / 2), rr.end());
    double median = rr[rr.size() / 2];
    if (rr.size() % 2 == 0) {
      const double lower = *std::max_element(rr.begin(), rr.begin() + static_cast<std::ptrdiff_t>(rr.size() / 2));
      median = 0.5 * (median + lower);
    }
    span_len = std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(1.2 * median)), 1, kBeatWindow);
  }

  for (std::size_t k = 0; k < mapped.size(); ++k) {
    const std::size_t start = mapped[k];
    if (start + span_len > resampled.size()) {
      out.skipped.push_back(k);
      continue;
    }
    const auto first = resampled.begin() + static_cast<std::ptrdiff_t>(start);
    const auto last = first + static_cast<std::ptrdiff_t>(span_len);
    const auto [lo, hi] = std::minmax_element(first, last);
    const double lo_v = *lo, range = *hi - *lo;
    std::array<double, kBeatWindow> w{};
    for (std::size_t i = 0; i < span_len; ++i) {
      w[i] = range > 0.0 ? (resampled[start + i] - lo_v) / range : 0.0;
    }
    out.windows.push_back(w);
    out.peak_positions.push_back(k);
  }
  return out;
}

StreamClassification classify_stream(const BeatPredictor& model, const SampleSeries& ecg,
                                     std::span<const std::size_t> peaks) {
  StreamClassification out;
  const auto windows = extract_beat_windows(ecg, peaks);
  out.skipped = windows.skipped;
  out.beats.reserve(windows.windows.size());
  for (std::size_t i = 0; i < windows.windows.size(); ++i) {
    const auto probs = model.predict(windows.windows[i]);
    const auto best = static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
    const std::size_t pos = windows.peak_positions[i];
    out.beats.push_back({pos, peaks[pos], static_cast<BeatClass>(best), probs[best]});
  }
  return out;
}

}  // namespace mywear::beats
