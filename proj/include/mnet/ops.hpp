#pragma once

#include "mnet/tape.hpp"
#include "mnet/tensor.hpp"

namespace mnet {

enum class Padding { kSame, kValid };
enum class Mode { kTrain, kEval };

// Differentiable ops. Each returns a tape-owned output and, when the tape is
// recording and any input requires a gradient, appends its backward rule.
// Gradients accumulate into `grad()` of every input that requires one.

/// Stride-1 cross-correlation. input [N,Cin,H,W], kernels [Cout,Cin,kh,kw],
/// bias [Cout] or null. Same padding needs odd kh and kw.
Tensor& conv2d(Tape& tape, Tensor& input, Tensor& kernels, Tensor* bias, Padding padding = Padding::kSame);

/// y = x W^T + b. input [N,Din], weight [Dout,Din], bias [Dout] or null.
Tensor& affine(Tape& tape, Tensor& input, Tensor& weight, Tensor* bias);

struct BatchNormOptions {
  double momentum = 0.9;  // running <- momentum * running + (1 - momentum) * batch
  double eps = 1e-5;
};

/// Per-channel normalization of [N,C,H,W]. Train mode uses batch statistics
/// (needs N >= 2) and updates the running buffers; eval mode uses them.
Tensor& batch_norm(Tape& tape, Tensor& input, Tensor& gamma, Tensor& beta, Tensor& running_mean,
                   Tensor& running_var, Mode mode, const BatchNormOptions& opts = {});

Tensor& tanh(Tape& tape, Tensor& input);
Tensor& leaky_relu(Tape& tape, Tensor& input, double slope);

/// Same values, new shape.
Tensor& reshape(Tape& tape, Tensor& input, Shape shape);

Tensor& add(Tape& tape, Tensor& a, Tensor& b);

/// sum(w .* x), a scalar. Handy for directional gradient checks.
Tensor& weighted_sum(Tape& tape, Tensor& input, const Tensor& weights);

/// (1/N) * sum_k ||pred_k - target_k||_F^2 with N the leading extent.
Tensor& mse_loss(Tape& tape, Tensor& pred, const Tensor& target);

}  // namespace mnet
