#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mywear/hrv.hpp"
#include "mywear/nn.hpp"
#include "mywear/signal.hpp"

namespace mywear::beats {

/// Architecture and optimizer settings of the heartbeat network.
struct NetworkConfig {
  std::size_t conv_layers = 6;
  std::size_t filters_per_layer = 64;
  std::size_t conv_stride = 2;
  std::size_t kernel_size = 5;
  std::size_t pool_size = 2;
  std::size_t pool_stride = 2;
  std::vector<std::size_t> fc_widths{128, 32, 5};
  std::size_t classes = kBeatClassCount;
  double learning_rate = 0.001;
  double momentum = 0.9;
  std::size_t batch_size = 64;
};

/// conv -> relu -> maxpool, repeated conv_layers times, then the FC stack
/// with ReLU between FC layers. Initialised He-uniform from `seed`.
nn::Network build_network(const NetworkConfig& cfg, std::uint64_t seed);

/// Reads the 188-column beat corpus (187 window values + integer label 0-4).
/// Throws MalformedRow, UnknownLabel.
std::vector<BeatSegment> load_mitbih_segments(const std::filesystem::path& path);
void write_segments(const std::filesystem::path& path, std::span<const BeatSegment> segments);

nn::LabeledSet to_labeled_set(std::span<const BeatSegment> segments);

/// Class-stratified split: `train_fraction` of every class goes to the first
/// set. Deterministic for a given seed.
std::pair<std::vector<BeatSegment>, std::vector<BeatSegment>> stratified_split(
    std::span<const BeatSegment> segments, double train_fraction, std::uint64_t seed);

/// Class-stratified subset of exactly min(count, size) segments; class
/// shares are kept up to largest-remainder rounding.
std::vector<BeatSegment> stratified_subset(std::span<const BeatSegment> segments, std::size_t count,
                                           std::uint64_t seed);

using ConfusionMatrix = std::array<std::array<std::size_t, kBeatClassCount>, kBeatClassCount>;

/// Rows are truth, columns prediction.
struct EvalReport {
  double accuracy_pct = 0.0;
  double precision_pct = 0.0;  // macro average over classes present
  double recall_pct = 0.0;     // macro average over classes present
  ConfusionMatrix confusion{};
  std::array<double, kBeatClassCount> class_precision_pct{};
  std::array<double, kBeatClassCount> class_recall_pct{};
  /// One-vs-rest accuracy (TP+TN)/(TP+TN+FP+FN) per class.
  std::array<double, kBeatClassCount> class_accuracy_pct{};
  std::array<std::size_t, kBeatClassCount> support{};
  std::size_t total = 0;
};

/// Metrics from a confusion matrix. Per-class precision/recall use one-vs-rest
/// counts; a class with no predictions (or no truth) contributes 0 and is
/// excluded from the macro average only when it has neither.
EvalReport metrics_from_confusion(const ConfusionMatrix& confusion);

/// Throws EmptyEvalSet.
EvalReport evaluate(const nn::Network& net, std::span<const BeatSegment> segments);

/// Anything that maps a normalised beat window to class probabilities.
class BeatPredictor {
 public:
  virtual ~BeatPredictor() = default;
  virtual std::array<double, kBeatClassCount> predict(std::span<const double, kBeatWindow> window) const = 0;
  /// Stable identifier of the model, embedded in reports.
  virtual std::string model_hash() const = 0;
};

class NetworkPredictor final : public BeatPredictor {
 public:
  explicit NetworkPredictor(nn::Network net);
  std::array<double, kBeatClassCount> predict(std::span<const double, kBeatWindow> window) const override;
  std::string model_hash() const override { return hash_; }
  const nn::Network& network() const noexcept { return net_; }

 private:
  nn::Network net_;
  std::string hash_;
};

struct ClassifiedBeat {
  std::size_t beat_index = 0;   // position in the peak list
  std::size_t sample_index = 0; // R-peak sample in the input series
  BeatClass label = BeatClass::N;
  double probability = 0.0;
};

struct StreamClassification {
  std::vector<ClassifiedBeat> beats;
  std::vector<std::size_t> skipped;  // peak-list positions too close to the end
};

/// Cuts one window per R peak and classifies it. The ECG is linearly
/// resampled to 125 Hz; each window starts at the R peak, spans
/// min(187, 1.2 * median RR) samples, is min-max normalised to [0, 1] and
/// zero padded to 187. Beats whose span runs past the end are skipped.
StreamClassification classify_stream(const BeatPredictor& model, const SampleSeries& ecg,
                                     std::span<const std::size_t> peaks);

/// The windowing step of classify_stream on its own.
struct BeatWindows {
  std::vector<std::array<double, kBeatWindow>> windows;
  std::vector<std::size_t> peak_positions;
  std::vector<std::size_t> skipped;
};
BeatWindows extract_beat_windows(const SampleSeries& ecg, std::span<const std::size_t> peaks);

}  // namespace mywear::beats
