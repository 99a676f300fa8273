#include "mnet/layers.hpp"

#include <cmath>

#include "mnet/error.hpp"

namespace mnet {

const char* layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::kConv2d: return "conv2d";
    case LayerKind::kAffine: return "affine";
    case LayerKind::kBatchNorm: return "batch_norm";
    case LayerKind::kLeakyRelu: return "leaky_relu";
    case LayerKind::kTanh: return "tanh";
    case LayerKind::kReshape: return "reshape";
  }
  return "unknown";
}

std::size_t Layer::parameter_count() {
  std::size_t n = 0;
  for (Tensor* p : parameters()) n += p->size();
  return n;
}

namespace {
void fill_uniform(Tensor& t, double limit, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (double& v : t.data()) v = dist(rng);
}
}  // namespace

Conv2dLayer::Conv2dLayer(std::size_t cin, std::size_t cout, std::size_t kh, std::size_t kw, bool with_bias)
    : kernels({cout, cin, kh, kw}) {
  kernels.set_requires_grad(true);
  if (with_bias) {
    bias = Tensor({cout});
    bias.set_requires_grad(true);
  }
}

void Conv2dLayer::init_glorot(std::mt19937_64& rng) {
  const double rf = static_cast<double>(kernels.dim(2) * kernels.dim(3));
  const double fan_in = static_cast<double>(kernels.dim(1)) * rf;
  const double fan_out = static_cast<double>(kernels.dim(0)) * rf;
  fill_uniform(kernels, std::sqrt(6.0 / (fan_in + fan_out)), rng);
}

Tensor& Conv2dLayer::forward(Tape& tape, Tensor& input, Mode) {
  return conv2d(tape, input, kernels, bias.empty() ? nullptr : &bias, Padding::kSame);
}

Shape Conv2dLayer::output_shape(const Shape& input) const {
  MNET_REQUIRE(input.size() == 3 && input[0] == kernels.dim(1), "conv2d expects [Cin,H,W] per sample");
  return {kernels.dim(0), input[1], input[2]};
}

std::uint64_t Conv2dLayer::macs(const Shape& input) const {
  const Shape out = output_shape(input);
  return static_cast<std::uint64_t>(kernels.size()) * out[1] * out[2];
}

std::vector<Tensor*> Conv2dLayer::parameters() {
  if (bias.empty()) return {&kernels};
  return {&kernels, &bias};
}

std::vector<std::uint32_t> Conv2dLayer::config() const {
  return {static_cast<std::uint32_t>(kernels.dim(0)), static_cast<std::uint32_t>(kernels.dim(1)),
          static_cast<std::uint32_t>(kernels.dim(2)), static_cast<std::uint32_t>(kernels.dim(3)),
          bias.empty() ? 0u : 1u};
}

AffineLayer::AffineLayer(std::size_t din, std::size_t dout, bool with_bias) : weight({dout, din}) {
  weight.set_requires_grad(true);
  if (with_bias) {
    bias = Tensor({dout});
    bias.set_requires_grad(true);
  }
}

void AffineLayer::init_glorot(std::mt19937_64& rng) {
  const double fan_in = static_cast<double>(weight.dim(1)), fan_out = static_cast<double>(weight.dim(0));
  fill_uniform(weight, std::sqrt(6.0 / (fan_in + fan_out)), rng);
}

Tensor& AffineLayer::forward(Tape& tape, Tensor& input, Mode) {
  return affine(tape, input, weight, bias.empty() ? nullptr : &bias);
}

Shape AffineLayer::output_shape(const Shape& input) const {
  MNET_REQUIRE(input.size() == 1 && input[0] == weight.dim(1), "affine expects [Din] per sample");
  return {weight.dim(0)};
}

std::uint64_t AffineLayer::macs(const Shape& input) const {
  (void)output_shape(input);
  return static_cast<std::uint64_t>(weight.size());
}

std::vector<Tensor*> AffineLayer::parameters() {
  if (bias.empty()) return {&weight};
  return {&weight, &bias};
}

std::vector<std::uint32_t> AffineLayer::config() const {
  return {static_cast<std::uint32_t>(weight.dim(0)), static_cast<std::uint32_t>(weight.dim(1)),
          bias.empty() ? 0u : 1u};
}

BatchNormLayer::BatchNormLayer(std::size_t channels)
    : gamma({channels}, 1.0), beta({channels}, 0.0), running_mean({channels}, 0.0), running_var({channels}, 1.0) {
  gamma.set_requires_grad(true);
  beta.set_requires_grad(true);
}

Tensor& BatchNormLayer::forward(Tape& tape, Tensor& input, Mode mode) {
  return batch_norm(tape, input, gamma, beta, running_mean, running_var, mode, options);
}

std::vector<std::uint32_t> BatchNormLayer::config() const { return {static_cast<std::uint32_t>(gamma.size())}; }

Tensor& ReshapeLayer::forward(Tape& tape, Tensor& input, Mode) {
  Shape full{input.dim(0)};
  full.insert(full.end(), target_.begin(), target_.end());
  return reshape(tape, input, std::move(full));
}

Shape ReshapeLayer::output_shape(const Shape& input) const {
  MNET_REQUIRE(shape_numel(input) == shape_numel(target_),
               "reshape " + shape_str(input) + " -> " + shape_str(target_) + " changes element count");
  return target_;
}

std::vector<std::uint32_t> ReshapeLayer::config() const {
  std::vector<std::uint32_t> c;
  for (std::size_t d : target_) c.push_back(static_cast<std::uint32_t>(d));
  return c;
}

LayerStack::LayerStack(const LayerStack& other) {
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

LayerStack& LayerStack::operator=(const LayerStack& other) {
  if (this != &other) {
    LayerStack copy(other);
    layers_ = std::move(copy.layers_);
  }
  return *this;
}

Tensor& LayerStack::forward(Tape& tape, Tensor& input, Mode mode) {
  Tensor* x = &input;
  for (auto& l : layers_) x = &l->forward(tape, *x, mode);
  return *x;
}

std::vector<Tensor*> LayerStack::parameters() {
  std::vector<Tensor*> out;
  for (auto& l : layers_) {
    auto p = l->parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

}  // namespace mnet
