#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <vector>

namespace mywear::nn {

/// Activation layout: channel-major, `length` samples per channel.
struct Shape {
  std::size_t channels = 1;
  std::size_t length = 1;
  std::size_t size() const noexcept { return channels * length; }
  bool operator==(const Shape&) const = default;
};

struct Param {
  std::vector<double> value;
  std::vector<double> grad;
};

/// A stateless transformation with optional trainable parameters. forward()
/// is const and reentrant; backward() accumulates into Param::grad.
class Layer {
 public:
  virtual ~Layer() = default;

  virtual Shape output_shape(Shape in) const = 0;
  virtual void forward(std::span<const double> in, Shape in_shape, std::span<double> out) const = 0;
  virtual void backward(std::span<const double> in, Shape in_shape, std::span<const double> out,
                        std::span<const double> grad_out, std::span<double> grad_in) = 0;

  virtual std::vector<Param*> params() { return {}; }
  virtual std::vector<const Param*> params() const { return {}; }
  virtual nlohmann::json describe() const = 0;
  virtual std::unique_ptr<Layer> clone() const = 0;
};

/// 1-D convolution with "same" padding applied before the stride:
/// out_len = ceil(in_len / stride). Weights are [out][in][kernel].
class Conv1d final : public Layer {
 public:
  Conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride);

  Shape output_shape(Shape in) const override;
  void forward(std::span<const double> in, Shape in_shape, std::span<double> out) const override;
  void backward(std::span<const double> in, Shape in_shape, std::span<const double> out,
                std::span<const double> grad_out, std::span<double> grad_in) override;
  std::vector<Param*> params() override { return {&weight_, &bias_}; }
  std::vector<const Param*> params() const override { return {&weight_, &bias_}; }
  nlohmann::json describe() const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv1d>(*this); }

  std::size_t in_channels() const noexcept { return in_channels_; }
  std::size_t out_channels() const noexcept { return out_channels_; }
  std::size_t kernel() const noexcept { return kernel_; }
  std::size_t stride() const noexcept { return stride_; }
  Param& weight() noexcept { return weight_; }
  Param& bias() noexcept { return bias_; }
  /// Zero padding before the first input sample.
  std::size_t pad_left(std::size_t in_len) const noexcept;

 private:
  std::size_t in_channels_, out_channels_, kernel_, stride_;
  Param weight_, bias_;
};

/// Max pooling per channel. The last window may be partial, so the output
/// never collapses to zero length: out_len = ceil((in_len - size) / stride) + 1.
class MaxPool1d final : public Layer {
 public:
  MaxPool1d(std::size_t size, std::size_t stride);

  Shape output_shape(Shape in) const override;
  void forward(std::span<const double> in, Shape in_shape, std::span<double> out) const override;
  void backward(std::span<const double> in, Shape in_shape, std::span<const double> out,
                std::span<const double> grad_out, std::span<double> grad_in) override;
  nlohmann::json describe() const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<MaxPool1d>(*this); }

 private:
  std::size_t size_, stride_;
};

/// max(0, x).
class Relu final : public Layer {
 public:
  Shape output_shape(Shape in) const override { return in; }
  void forward(std::span<const double> in, Shape in_shape, std::span<double> out) const override;
  void backward(std::span<const double> in, Shape in_shape, std::span<const double> out,
                std::span<const double> grad_out, std::span<double> grad_in) override;
  nlohmann::json describe() const override { return {{"type", "relu"}}; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Relu>(*this); }
};

/// Fully connected layer over the flattened input. Weights are [out][in].
class Dense final : public Layer {
 public:
  Dense(std::size_t in_features, std::size_t out_features);

  Shape output_shape(Shape in) const override;
  void forward(std::span<const double> in, Shape in_shape, std::span<double> out) const override;
  void backward(std::span<const double> in, Shape in_shape, std::span<const double> out,
                std::span<const double> grad_out, std::span<double> grad_in) override;
  std::vector<Param*> params() override { return {&weight_, &bias_}; }
  std::vector<const Param*> params() const override { return {&weight_, &bias_}; }
  nlohmann::json describe() const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Dense>(*this); }

  std::size_t in_features() const noexcept { return in_; }
  std::size_t out_features() const noexcept { return out_; }
  Param& weight() noexcept { return weight_; }
  Param& bias() noexcept { return bias_; }

 private:
  std::size_t in_, out_;
  Param weight_, bias_;
};

/// Numerically stable softmax.
std::vector<double> softmax(std::span<const double> logits);

/// Scratch buffers for one forward/backward pass.
struct Workspace {
  std::vector<std::vector<double>> activations;
  std::vector<std::vector<double>> grads;
};

/// Feed-forward stack ending in class logits; probabilities come from softmax.
class Network {
 public:
  explicit Network(Shape input);
  Network(const Network& other);
  Network& operator=(const Network& other);
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  Network& add(std::unique_ptr<Layer> layer);

  Shape input_shape() const noexcept { return input_; }
  Shape output_shape() const noexcept { return shapes_.back(); }
  /// Shape after each layer, starting with the input.
  const std::vector<Shape>& shapes() const noexcept { return shapes_; }
  std::size_t num_classes() const noexcept { return shapes_.back().size(); }
  const std::vector<std::unique_ptr<Layer>>& layers() const noexcept { return layers_; }

  std::vector<double> logits(std::span<const double> x) const;
  std::vector<double> predict_proba(std::span<const double> x) const;

  /// Softmax cross-entropy on one sample; adds weight * dLoss/dParam to every
  /// Param::grad and returns the weighted loss. Throws ShapeMismatch.
  double accumulate_gradient(std::span<const double> x, std::size_t label, double weight, Workspace& ws,
                             std::size_t* predicted = nullptr);

  std::vector<Param*> params();
  std::vector<const Param*> params() const;
  std::size_t parameter_count() const;
  void zero_grad();

  /// He-uniform weights (limit sqrt(6 / fan_in)), zero biases.
  void init_he_uniform(std::uint64_t seed);

  nlohmann::json describe() const;
  /// Rebuilds a network (with zeroed parameters) from describe() output.
  static Network from_description(const nlohmann::json& desc);

 private:
  void check_input(std::span<const double> x) const;

  Shape input_;
  std::vector<std::unique_ptr<Layer>> layers_;
  std::vector<Shape> shapes_;
};

/// Model container: 8-byte magic "MYWEARNN", u32 LE format version (1),
/// u32 LE header length, UTF-8 JSON header (architecture, per-tensor element
/// counts, free-form metadata), then every parameter tensor in order as
/// little-endian IEEE-754 binary64.
inline constexpr std::uint32_t kModelFormatVersion = 1;

std::vector<std::uint8_t> serialize(const Network& net, const nlohmann::json& metadata = nlohmann::json::object());
Network deserialize(std::span<const std::uint8_t> bytes, nlohmann::json* metadata = nullptr);
void save(const Network& net, const std::filesystem::path& path,
          const nlohmann::json& metadata = nlohmann::json::object());
Network load(const std::filesystem::path& path, nlohmann::json* metadata = nullptr);

struct LabeledSet {
  std::vector<std::vector<double>> inputs;
  std::vector<std::size_t> labels;
  std::size_t size() const noexcept { return labels.size(); }
};

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 64;
  double learning_rate = 0.001;
  double momentum = 0.9;
  std::uint64_t seed = 1;
  /// Inverse class-frequency sample weights.
  bool class_weighting = false;
};

struct EpochStats {
  double loss = 0.0;
  double accuracy = 0.0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
};

using EpochCallback = std::function<void(std::size_t epoch, const EpochStats&)>;

/// Mini-batch SGD with classical momentum on mean softmax cross-entropy.
/// Shuffles each epoch with a generator seeded from cfg.seed, so runs are
/// reproducible. Throws EmptyTrainingSet, DivergedLoss.
TrainHistory train(Network& net, const LabeledSet& data, const TrainConfig& cfg,
                   const EpochCallback& on_epoch = {});

std::size_t argmax(std::span<const double> v);

}  // namespace mywear::nn
