#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <vector>

#include "mnet/ops.hpp"

namespace mnet {

/// Tag written into checkpoints. Values are part of the file format.
enum class LayerKind : std::uint32_t {
  kConv2d = 1,
  kAffine = 2,
  kBatchNorm = 3,
  kLeakyRelu = 4,
  kTanh = 5,
  kReshape = 6,
};

const char* layer_kind_name(LayerKind kind);

class Layer {
 public:
  virtual ~Layer() = default;

  virtual LayerKind kind() const = 0;
  /// `input` carries the batch axis first.
  virtual Tensor& forward(Tape& tape, Tensor& input, Mode mode) = 0;
  /// Per-sample output shape (no batch axis) for a per-sample input shape.
  virtual Shape output_shape(const Shape& input) const = 0;
  /// Multiply-accumulates per sample, biases excluded.
  virtual std::uint64_t macs(const Shape& input) const { (void)input; return 0; }

  /// Trainable tensors.
  virtual std::vector<Tensor*> parameters() { return {}; }
  /// Everything a checkpoint must persist, trainable or not, in file order.
  virtual std::vector<Tensor*> state() { return parameters(); }
  /// Layer configuration written as the checkpoint shape list.
  virtual std::vector<std::uint32_t> config() const = 0;

  virtual std::unique_ptr<Layer> clone() const = 0;

  std::size_t parameter_count();
};

class Conv2dLayer final : public Layer {
 public:
  Conv2dLayer(std::size_t cin, std::size_t cout, std::size_t kh, std::size_t kw, bool with_bias);
  void init_glorot(std::mt19937_64& rng);

  LayerKind kind() const override { return LayerKind::kConv2d; }
  Tensor& forward(Tape& tape, Tensor& input, Mode mode) override;
  Shape output_shape(const Shape& input) const override;
  std::uint64_t macs(const Shape& input) const override;
  std::vector<Tensor*> parameters() override;
  std::vector<std::uint32_t> config() const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv2dLayer>(*this); }

  Tensor kernels;
  Tensor bias;  // empty when bias-free
};

class AffineLayer final : public Layer {
 public:
  AffineLayer(std::size_t din, std::size_t dout, bool with_bias);
  void init_glorot(std::mt19937_64& rng);

  LayerKind kind() const override { return LayerKind::kAffine; }
  Tensor& forward(Tape& tape, Tensor& input, Mode mode) override;
  Shape output_shape(const Shape& input) const override;
  std::uint64_t macs(const Shape& input) const override;
  std::vector<Tensor*> parameters() override;
  std::vector<std::uint32_t> config() const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<AffineLayer>(*this); }

  Tensor weight;
  Tensor bias;
};

class BatchNormLayer final : public Layer {
 public:
  explicit BatchNormLayer(std::size_t channels);

  LayerKind kind() const override { return LayerKind::kBatchNorm; }
  Tensor& forward(Tape& tape, Tensor& input, Mode mode) override;
  Shape output_shape(const Shape& input) const override { return input; }
  std::vector<Tensor*> parameters() override { return {&gamma, &beta}; }
  std::vector<Tensor*> state() override { return {&gamma, &beta, &running_mean, &running_var}; }
  std::vector<std::uint32_t> config() const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<BatchNormLayer>(*this); }

  Tensor gamma, beta, running_mean, running_var;
  BatchNormOptions options;
};

class LeakyReluLayer final : public Layer {
 public:
  explicit LeakyReluLayer(double slope) : slope_(Tensor::scalar(slope)) {}

  LayerKind kind() const override { return LayerKind::kLeakyRelu; }
  Tensor& forward(Tape& tape, Tensor& input, Mode) override { return leaky_relu(tape, input, slope_[0]); }
  Shape output_shape(const Shape& input) const override { return input; }
  std::vector<Tensor*> state() override { return {&slope_}; }
  std::vector<std::uint32_t> config() const override { return {}; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<LeakyReluLayer>(*this); }
  double slope() const { return slope_[0]; }

 private:
  Tensor slope_;
};

class TanhLayer final : public Layer {
 public:
  LayerKind kind() const override { return LayerKind::kTanh; }
  Tensor& forward(Tape& tape, Tensor& input, Mode) override { return mnet::tanh(tape, input); }
  Shape output_shape(const Shape& input) const override { return input; }
  std::vector<std::uint32_t> config() const override { return {}; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<TanhLayer>(*this); }
};

/// Reinterprets each sample as `target` (batch axis preserved).
class ReshapeLayer final : public Layer {
 public:
  explicit ReshapeLayer(Shape target) : target_(std::move(target)) {}

  LayerKind kind() const override { return LayerKind::kReshape; }
  Tensor& forward(Tape& tape, Tensor& input, Mode mode) override;
  Shape output_shape(const Shape& input) const override;
  std::vector<std::uint32_t> config() const override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<ReshapeLayer>(*this); }
  const Shape& target() const { return target_; }

 private:
  Shape target_;
};

/// Ordered layer list run front to back.
class LayerStack {
 public:
  LayerStack() = default;
  LayerStack(const LayerStack& other);
  LayerStack& operator=(const LayerStack& other);
  LayerStack(LayerStack&&) noexcept = default;
  LayerStack& operator=(LayerStack&&) noexcept = default;

  template <typename L, typename... Args>
  L& emplace(Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    layers_.push_back(std::move(layer));
    return ref;
  }
  void push(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }

  Tensor& forward(Tape& tape, Tensor& input, Mode mode);
  std::vector<Tensor*> parameters();

  std::size_t size() const { return layers_.size(); }
  Layer& operator[](std::size_t i) { return *layers_[i]; }
  const Layer& operator[](std::size_t i) const { return *layers_[i]; }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

}  // namespace mnet
