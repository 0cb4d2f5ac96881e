#include "mywear/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>

#include "mywear/error.hpp"

namespace mywear::nn {
namespace {

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(Errc::ShapeMismatch, what);
}

}  // namespace

// ---------------------------------------------------------------- Conv1d

Conv1d::Conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride)
    : in_channels_(in_channels), out_channels_(out_channels), kernel_(kernel), stride_(stride) {
  require(in_channels > 0 && out_channels > 0 && kernel > 0 && stride > 0, "conv1d dimensions must be positive");
  weight_.value.assign(out_channels * in_channels * kernel, 0.0);
  weight_.grad.assign(weight_.value.size(), 0.0);
  bias_.value.assign(out_channels, 0.0);
  bias_.grad.assign(out_channels, 0.0);
}

Shape Conv1d::output_shape(Shape in) const {
  require(in.channels == in_channels_, "conv1d expects " + std::to_string(in_channels_) + " input channels, got " +
                                           std::to_string(in.channels));
  return {out_channels_, ceil_div(in.length, stride_)};
}

std::size_t Conv1d::pad_left(std::size_t in_len) const noexcept {
  const std::size_t out_len = ceil_div(in_len, stride_);
  const std::size_t needed = (out_len - 1) * stride_ + kernel_;
  return needed > in_len ? (needed - in_len) / 2 : 0;
}

void Conv1d::forward(std::span<const double> in, Shape in_shape, std::span<double> out) const {
  const std::size_t L = in_shape.length;
  const std::size_t out_len = ceil_div(L, stride_);
  const auto pad = static_cast<std::ptrdiff_t>(pad_left(L));
  for (std::size_t o = 0; o < out_channels_; ++o) {
    double* dst = out.data() + o * out_len;
    std::fill(dst, dst + out_len, bias_.value[o]);
    for (std::size_t c = 0; c < in_channels_; ++c) {
      const double* src = in.data() + c * L;
      const double* w = weight_.value.data() + (o * in_channels_ + c) * kernel_;
      for (std::size_t t = 0; t < out_len; ++t) {
        const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(t * stride_) - pad;
        const std::size_t j_lo = base < 0 ? static_cast<std::size_t>(-base) : 0;
        const std::size_t j_hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(kernel_),
                                                          static_cast<std::ptrdiff_t>(L) - base);
        double acc = 0.0;
        for (std::size_t j = j_lo; j < j_hi; ++j) acc += w[j] * src[base + static_cast<std::ptrdiff_t>(j)];
        dst[t] += acc;
      }
    }
  }
}

void Conv1d::backward(std::span<const double> in, Shape in_shape, std::span<const double>,
                      std::span<const double> grad_out, std::span<double> grad_in) {
  const std::size_t L = in_shape.length;
  const std::size_t out_len = ceil_div(L, stride_);
  const auto pad = static_cast<std::ptrdiff_t>(pad_left(L));
  std::fill(grad_in.begin(), grad_in.end(), 0.0);
  for (std::size_t o = 0; o < out_channels_; ++o) {
    const double* g = grad_out.data() + o * out_len;
    double gb = 0.0;
    for (std::size_t t = 0; t < out_len; ++t) gb += g[t];
    bias_.grad[o] += gb;
    for (std::size_t c = 0; c < in_channels_; ++c) {
      const double* src = in.data() + c * L;
      double* gsrc = grad_in.data() + c * L;
      const std::size_t widx = (o * in_channels_ + c) * kernel_;
      const double* w = weight_.value.data() + widx;
      double* gw = weight_.grad.data() + widx;
      for (std::size_t t = 0; t < out_len; ++t) {
        const double gt = g[t];
        if (gt == 0.0) continue;
        const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(t * stride_) - pad;
        const std::size_t j_lo = base < 0 ? static_cast<std::size_t>(-base) : 0;
        const std::size_t j_hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(kernel_),
                                                          static_cast<std::ptrdiff_t>(L) - base);
        for (std::size_t j = j_lo; j < j_hi; ++j) {
          const auto pos = base + static_cast<std::ptrdiff_t>(j);
          gw[j] += gt * src[pos];
          gsrc[pos] += gt * w[j];
        }
      }
    }
  }
}

nlohmann::json Conv1d::describe() const {
  return {{"type", "conv1d"}, {"in", in_channels_}, {"out", out_channels_}, {"kernel", kernel_}, {"stride", stride_}};
}

// ------------------------------------------------------------- MaxPool1d

MaxPool1d::MaxPool1d(std::size_t size, std::size_t stride) : size_(size), stride_(stride) {
  require(size > 0 && stride > 0, "maxpool size and stride must be positive");
}

Shape MaxPool1d::output_shape(Shape in) const {
  require(in.length > 0, "maxpool input is empty");
  const std::size_t len = in.length <= size_ ? 1 : ceil_div(in.length - size_, stride_) + 1;
  return {in.channels, len};
}

void MaxPool1d::forward(std::span<const double> in, Shape in_shape, std::span<double> out) const {
  const Shape os = output_shape(in_shape);
  for (std::size_t c = 0; c < in_shape.channels; ++c) {
    const double* src = in.data() + c * in_shape.length;
    for (std::size_t t = 0; t < os.length; ++t) {
      const std::size_t lo = t * stride_;
      const std::size_t hi = std::min(in_shape.length, lo + size_);
      out[c * os.length + t] = *std::max_element(src + lo, src + hi);
    }
  }
}

void MaxPool1d::backward(std::span<const double> in, Shape in_shape, std::span<const double>,
                         std::span<const double> grad_out, std::span<double> grad_in) {
  const Shape os = output_shape(in_shape);
  std::fill(grad_in.begin(), grad_in.end(), 0.0);
  for (std::size_t c = 0; c < in_shape.channels; ++c) {
    const double* src = in.data() + c * in_shape.length;
    for (std::size_t t = 0; t < os.length; ++t) {
      const std::size_t lo = t * stride_;
      const std::size_t hi = std::min(in_shape.length, lo + size_);
      // First maximum wins, matching forward's std::max_element.
      const auto arg = static_cast<std::size_t>(std::max_element(src + lo, src + hi) - src);
      grad_in[c * in_shape.length + arg] += grad_out[c * os.length + t];
    }
  }
}

nlohmann::json MaxPool1d::describe() const { return {{"type", "maxpool1d"}, {"size", size_}, {"stride", stride_}}; }

// ------------------------------------------------------------------ Relu

void Relu::forward(std::span<const double> in, Shape, std::span<double> out) const {
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
}

void Relu::backward(std::span<const double> in, Shape, std::span<const double>, std::span<const double> grad_out,
                    std::span<double> grad_in) {
  for (std::size_t i = 0; i < in.size(); ++i) grad_in[i] = in[i] > 0.0 ? grad_out[i] : 0.0;
}

// ----------------------------------------------------------------- Dense

Dense::Dense(std::size_t in_features, std::size_t out_features) : in_(in_features), out_(out_features) {
  require(in_features > 0 && out_features > 0, "dense dimensions must be positive");
  weight_.value.assign(in_ * out_, 0.0);
  weight_.grad.assign(in_ * out_, 0.0);
  bias_.value.assign(out_, 0.0);
  bias_.grad.assign(out_, 0.0);
}

Shape Dense::output_shape(Shape in) const {
  require(in.size() == in_, "dense expects " + std::to_string(in_) + " features, got " + std::to_string(in.size()));
  return {out_, 1};
}

void Dense::forward(std::span<const double> in, Shape, std::span<double> out) const {
  for (std::size_t o = 0; o < out_; ++o) {
    const double* w = weight_.value.data() + o * in_;
    double acc = bias_.value[o];
    for (std::size_t i = 0; i < in_; ++i) acc += w[i] * in[i];
    out[o] = acc;
  }
}

void Dense::backward(std::span<const double> in, Shape, std::span<const double>, std::span<const double> grad_out,
                     std::span<double> grad_in) {
  std::fill(grad_in.begin(), grad_in.end(), 0.0);
  for (std::size_t o = 0; o < out_; ++o) {
    const double g = grad_out[o];
    bias_.grad[o] += g;
    if (g == 0.0) continue;
    const double* w = weight_.value.data() + o * in_;
    double* gw = weight_.grad.data() + o * in_;
    for (std::size_t i = 0; i < in_; ++i) {
      gw[i] += g * in[i];
      grad_in[i] += g * w[i];
    }
  }
}

nlohmann::json Dense::describe() const { return {{"type", "dense"}, {"in", in_}, {"out", out_}}; }

// --------------------------------------------------------------- Network

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  if (p.empty()) return p;
  const double mx = *std::max_element(p.begin(), p.end());
  double sum = 0.0;
  for (double& v : p) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : p) v /= sum;
  return p;
}

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

Network::Network(Shape input) : input_(input), shapes_{input} {
  require(input.size() > 0, "network input must be non-empty");
}

Network::Network(const Network& other) : input_(other.input_), shapes_(other.shapes_) {
  layers_.reserve(other.layers_.size());
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Network& Network::operator=(const Network& other) {
  if (this != &other) {
    Network copy(other);
    *this = std::move(copy);
  }
  return *this;
}

Network& Network::add(std::unique_ptr<Layer> layer) {
  shapes_.push_back(layer->output_shape(shapes_.back()));
  layers_.push_back(std::move(layer));
  return *this;
}

void Network::check_input(std::span<const double> x) const {
  require(x.size() == input_.size(),
          "input has " + std::to_string(x.size()) + " values, network expects " + std::to_string(input_.size()));
}

std::vector<double> Network::logits(std::span<const double> x) const {
  check_input(x);
  std::vector<double> cur(x.begin(), x.end());
  std::vector<double> next;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    next.assign(shapes_[i + 1].size(), 0.0);
    layers_[i]->forward(cur, shapes_[i], next);
    cur.swap(next);
  }
  return cur;
}

std::vector<double> Network::predict_proba(std::span<const double> x) const { return softmax(logits(x)); }

double Network::accumulate_gradient(std::span<const double> x, std::size_t label, double weight, Workspace& ws,
                                    std::size_t* predicted) {
  check_input(x);
  const std::size_t nl = layers_.size();
  require(label < num_classes(), "label " + std::to_string(label) + " out of range");
  ws.activations.resize(nl + 1);
  ws.grads.resize(nl + 1);
  ws.activations[0].assign(x.begin(), x.end());
  for (std::size_t i = 0; i < nl; ++i) {
    ws.activations[i + 1].assign(shapes_[i + 1].size(), 0.0);
    layers_[i]->forward(ws.activations[i], shapes_[i], ws.activations[i + 1]);
  }
  const auto prob = softmax(ws.activations[nl]);
  if (predicted) *predicted = argmax(prob);
  const double loss = -weight * std::log(std::max(prob[label], 1e-300));

  ws.grads[nl].assign(prob.begin(), prob.end());
  ws.grads[nl][label] -= 1.0;
  for (double& g : ws.grads[nl]) g *= weight;
  for (std::size_t i = nl; i-- > 0;) {
    ws.grads[i].assign(shapes_[i].size(), 0.0);
    layers_[i]->backward(ws.activations[i], shapes_[i], ws.activations[i + 1], ws.grads[i + 1], ws.grads[i]);
  }
  return loss;
}

std::vector<Param*> Network::params() {
  std::vector<Param*> out;
  for (auto& l : layers_) {
    auto p = l->params();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

std::vector<const Param*> Network::params() const {
  std::vector<const Param*> out;
  for (const auto& l : layers_) {
    const Layer& cl = *l;
    auto p = cl.params();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const Param* p : params()) n += p->value.size();
  return n;
}

void Network::zero_grad() {
  for (Param* p : params()) std::fill(p->grad.begin(), p->grad.end(), 0.0);
}

void Network::init_he_uniform(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto& l : layers_) {
    std::size_t fan_in = 0;
    Param* w = nullptr;
    Param* b = nullptr;
    if (auto* conv = dynamic_cast<Conv1d*>(l.get())) {
      fan_in = conv->in_channels() * conv->kernel();
      w = &conv->weight();
      b = &conv->bias();
    } else if (auto* dense = dynamic_cast<Dense*>(l.get())) {
      fan_in = dense->in_features();
      w = &dense->weight();
      b = &dense->bias();
    } else {
      continue;
    }
    std::uniform_real_distribution<double> dist(-std::sqrt(6.0 / static_cast<double>(fan_in)),
                                                std::sqrt(6.0 / static_cast<double>(fan_in)));
    for (double& v : w->value) v = dist(rng);
    std::fill(b->value.begin(), b->value.end(), 0.0);
  }
}

nlohmann::json Network::describe() const {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : layers_) layers.push_back(l->describe());
  return {{"input", {{"channels", input_.channels}, {"length", input_.length}}}, {"layers", layers}};
}

Network Network::from_description(const nlohmann::json& desc) {
  try {
    Network net({desc.at("input").at("channels").get<std::size_t>(), desc.at("input").at("length").get<std::size_t>()});
    for (const auto& l : desc.at("layers")) {
      const auto type = l.at("type").get<std::string>();
      if (type == "conv1d") {
        net.add(std::make_unique<Conv1d>(l.at("in").get<std::size_t>(), l.at("out").get<std::size_t>(),
                                         l.at("kernel").get<std::size_t>(), l.at("stride").get<std::size_t>()));
      } else if (type == "maxpool1d") {
        net.add(std::make_unique<MaxPool1d>(l.at("size").get<std::size_t>(), l.at("stride").get<std::size_t>()));
      } else if (type == "relu") {
        net.add(std::make_unique<Relu>());
      } else if (type == "dense") {
        net.add(std::make_unique<Dense>(l.at("in").get<std::size_t>(), l.at("out").get<std::size_t>()));
      } else {
        throw Error(Errc::ShapeMismatch, "unknown layer type '" + type + "'");
      }
    }
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ShapeMismatch, std::string("bad network description: ") + e.what());
  }
}

// --------------------------------------------------------- serialization

namespace {

constexpr char kMagic[8] = {'M', 'Y', 'W', 'E', 'A', 'R', 'N', 'N'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[at + static_cast<std::size_t>(i)]) << (8 * i);
  return v;
}

void put_f64(std::vector<std::uint8_t>& out, double d) {
  const auto bits = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

double get_f64(std::span<const std::uint8_t> b, std::size_t at) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[at + static_cast<std::size_t>(i)]) << (8 * i);
  return std::bit_cast<double>(bits);
}

[[noreturn]] void corrupt(const std::string& why) { throw Error(Errc::ShapeMismatch, "model file: " + why); }

}  // namespace

std::vector<std::uint8_t> serialize(const Network& net, const nlohmann::json& metadata) {
  nlohmann::json header = net.describe();
  nlohmann::json counts = nlohmann::json::array();
  for (const Param* p : net.params()) counts.push_back(p->value.size());
  header["param_counts"] = counts;
  header["meta"] = metadata;
  const std::string text = header.dump();

  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, kModelFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  for (const Param* p : net.params()) {
    for (double v : p->value) put_f64(out, v);
  }
  return out;
}

Network deserialize(std::span<const std::uint8_t> bytes, nlohmann::json* metadata) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0) corrupt("bad magic");
  if (get_u32(bytes, 8) != kModelFormatVersion) corrupt("unsupported version " + std::to_string(get_u32(bytes, 8)));
  const std::size_t hlen = get_u32(bytes, 12);
  if (16 + hlen > bytes.size()) corrupt("truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(hlen));
  } catch (const nlohmann::json::exception& e) {
    corrupt(e.what());
  }
  Network net = Network::from_description(header);
  auto params = net.params();
  const auto counts = header.value("param_counts", nlohmann::json::array());
  if (counts.size() != params.size()) corrupt("tensor count mismatch");
  std::size_t at = 16 + hlen;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto n = counts[k].get<std::size_t>();
    if (n != params[k]->value.size()) corrupt("tensor " + std::to_string(k) + " has wrong size");
    if (at + 8 * n > bytes.size()) corrupt("truncated parameters");
    for (std::size_t i = 0; i < n; ++i, at += 8) params[k]->value[i] = get_f64(bytes, at);
  }
  if (at != bytes.size()) corrupt("trailing bytes");
  if (metadata) *metadata = header.value("meta", nlohmann::json::object());
  return net;
}

void save(const Network& net, const std::filesystem::path& path, const nlohmann::json& metadata) {
  const auto bytes = serialize(net, metadata);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Network load(const std::filesystem::path& path, nlohmann::json* metadata) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes, metadata);
}

// -------------------------------------------------------------- training

TrainHistory train(Network& net, const LabeledSet& data, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  if (data.size() == 0) throw Error(Errc::EmptyTrainingSet, "no training samples");
  if (data.inputs.size() != data.labels.size()) throw Error(Errc::ShapeMismatch, "inputs/labels length differ");
  const std::size_t batch = std::max<std::size_t>(1, cfg.batch_size);
  const std::size_t classes = net.num_classes();

  std::vector<double> sample_weight(classes, 1.0);
  if (cfg.class_weighting) {
    std::vector<std::size_t> count(classes, 0);
    for (auto y : data.labels) ++count.at(y);
    for (std::size_t c = 0; c < classes; ++c) {
      sample_weight[c] = count[c] ? static_cast<double>(data.size()) / (static_cast<double>(classes * count[c])) : 0.0;
    }
  }

  auto params = net.params();
  std::vector<std::vector<double>> velocity;
  velocity.reserve(params.size());
  for (Param* p : params) velocity.emplace_back(p->value.size(), 0.0);

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  Workspace ws;
  TrainHistory history;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      net.zero_grad();
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t idx = order[k];
        const std::size_t y = data.labels[idx];
        std::size_t pred = 0;
        loss_sum += net.accumulate_gradient(data.inputs[idx], y, sample_weight[y], ws, &pred);
        correct += pred == y ? 1 : 0;
      }
      if (!std::isfinite(loss_sum)) {
        throw Error(Errc::DivergedLoss, "loss became non-finite in epoch " + std::to_string(epoch));
      }
      const double scale = 1.0 / static_cast<double>(end - start);
      for (std::size_t k = 0; k < params.size(); ++k) {
        auto& v = velocity[k];
        auto& p = *params[k];
        for (std::size_t i = 0; i < v.size(); ++i) {
          v[i] = cfg.momentum * v[i] - cfg.learning_rate * p.grad[i] * scale;
          p.value[i] += v[i];
        }
      }
    }
    EpochStats stats{loss_sum / static_cast<double>(data.size()),
                     static_cast<double>(correct) / static_cast<double>(data.size())};
    history.epochs.push_back(stats);
    if (on_epoch) on_epoch(epoch, stats);
  }
  return history;
}

}  // namespace mywear::nn
