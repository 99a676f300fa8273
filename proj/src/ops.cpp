#include "mnet/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <vector>

#include "mnet/error.hpp"

namespace mnet {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

bool any_grad(const Tensor& a) { return a.requires_grad(); }

Tensor& make_output(Tape& tape, Shape shape, bool needs_grad) {
  Tensor& out = tape.keep(Tensor(std::move(shape)));
  out.set_requires_grad(needs_grad && tape.recording());
  return out;
}

struct ConvGeom {
  std::size_t n, cin, h, w, cout, kh, kw, ph, pw, oh, ow;
  std::size_t padded_h() const { return oh + kh - 1; }
  std::size_t padded_w() const { return ow + kw - 1; }
};

// Copies [c][h][w] planes into a zero buffer of [c][oh+kh-1][ow+kw-1] with
// the data offset by (ph, pw).
void pad_planes(const double* src, std::size_t c, std::size_t h, std::size_t w, std::size_t ph, std::size_t pw,
                std::size_t ph_total, std::size_t pw_total, std::vector<double>& dst) {
  dst.assign(c * ph_total * pw_total, 0.0);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < h; ++y)
      std::copy_n(src + (ch * h + y) * w, w, dst.data() + (ch * ph_total + y + ph) * pw_total + pw);
}

// One output row for B consecutive output channels, row width fixed at W so
// the accumulators stay in registers.
template <std::size_t W, std::size_t B>
void correlate_row_fixed(const double* pad, std::size_t cin, std::size_t ph_total, std::size_t pw_total,
                         const double* kernels, std::size_t co0, std::size_t kh, std::size_t kw, std::size_t y,
                         double* out_plane0, std::size_t plane_size) {
  double acc[B][W] = {};
  for (std::size_t ci = 0; ci < cin; ++ci) {
    for (std::size_t i = 0; i < kh; ++i) {
      const double* row = pad + (ci * ph_total + y + i) * pw_total;
      for (std::size_t j = 0; j < kw; ++j) {
        const double* r = row + j;
        for (std::size_t b = 0; b < B; ++b) {
          const double wv = kernels[(((co0 + b) * cin + ci) * kh + i) * kw + j];
          for (std::size_t x = 0; x < W; ++x) acc[b][x] += wv * r[x];
        }
      }
    }
  }
  for (std::size_t b = 0; b < B; ++b) {
    double* dst = out_plane0 + (co0 + b) * plane_size + y * W;
    for (std::size_t x = 0; x < W; ++x) dst[x] += acc[b][x];
  }
}

void correlate_row_any(const double* pad, std::size_t cin, std::size_t ph_total, std::size_t pw_total,
                       const double* kernels, std::size_t co, std::size_t kh, std::size_t kw, std::size_t y,
                       std::size_t ow, double* out_plane0, std::size_t plane_size, std::vector<double>& acc) {
  acc.assign(ow, 0.0);
  for (std::size_t ci = 0; ci < cin; ++ci) {
    for (std::size_t i = 0; i < kh; ++i) {
      const double* row = pad + (ci * ph_total + y + i) * pw_total;
      for (std::size_t j = 0; j < kw; ++j) {
        const double wv = kernels[((co * cin + ci) * kh + i) * kw + j];
        for (std::size_t x = 0; x < ow; ++x) acc[x] += wv * row[x + j];
      }
    }
  }
  double* dst = out_plane0 + co * plane_size + y * ow;
  for (std::size_t x = 0; x < ow; ++x) dst[x] += acc[x];
}

// out[co] += sum_{ci,i,j} kernels[co,ci,i,j] * pad[ci, y+i, x+j] for one sample.
void correlate(const double* pad, std::size_t cin, std::size_t ph_total, std::size_t pw_total, const double* kernels,
               std::size_t cout, std::size_t kh, std::size_t kw, std::size_t oh, std::size_t ow, double* out) {
  const std::size_t plane = oh * ow;
  if (ow == 32) {
    for (std::size_t y = 0; y < oh; ++y) {
      std::size_t co = 0;
      for (; co + 2 <= cout; co += 2)
        correlate_row_fixed<32, 2>(pad, cin, ph_total, pw_total, kernels, co, kh, kw, y, out, plane);
      for (; co < cout; ++co)
        correlate_row_fixed<32, 1>(pad, cin, ph_total, pw_total, kernels, co, kh, kw, y, out, plane);
    }
    return;
  }
  std::vector<double> acc;
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t co = 0; co < cout; ++co)
      correlate_row_any(pad, cin, ph_total, pw_total, kernels, co, kh, kw, y, ow, out, plane, acc);
}

// dK[co,ci,i,j] += sum_{y,x} dy[co,y,x] * pad[ci, y+i, x+j] for one sample.
void kernel_grad(const double* pad, std::size_t cin, std::size_t ph_total, std::size_t pw_total, const double* dy,
                 std::size_t cout, std::size_t kh, std::size_t kw, std::size_t oh, std::size_t ow, double* dk) {
  std::vector<double> acc(ow);
  for (std::size_t co = 0; co < cout; ++co) {
    const double* g = dy + co * oh * ow;
    for (std::size_t ci = 0; ci < cin; ++ci) {
      for (std::size_t i = 0; i < kh; ++i) {
        for (std::size_t j = 0; j < kw; ++j) {
          double sum = 0.0;
          if (ow == 32) {
            double a[32] = {};
            for (std::size_t y = 0; y < oh; ++y) {
              const double* r = pad + (ci * ph_total + y + i) * pw_total + j;
              const double* gy = g + y * 32;
              for (std::size_t x = 0; x < 32; ++x) a[x] += gy[x] * r[x];
            }
            for (double v : a) sum += v;
          } else {
            std::fill(acc.begin(), acc.end(), 0.0);
            for (std::size_t y = 0; y < oh; ++y) {
              const double* r = pad + (ci * ph_total + y + i) * pw_total + j;
              const double* gy = g + y * ow;
              for (std::size_t x = 0; x < ow; ++x) acc[x] += gy[x] * r[x];
            }
            for (double v : acc) sum += v;
          }
          dk[((co * cin + ci) * kh + i) * kw + j] += sum;
        }
      }
    }
  }
}

}  // namespace

Tensor& conv2d(Tape& tape, Tensor& input, Tensor& kernels, Tensor* bias, Padding padding) {
  MNET_REQUIRE(input.rank() == 4, "conv2d input must be [N,Cin,H,W], got " + shape_str(input.shape()));
  MNET_REQUIRE(kernels.rank() == 4, "conv2d kernels must be [Cout,Cin,kh,kw], got " + shape_str(kernels.shape()));
  MNET_REQUIRE(input.dim(1) == kernels.dim(1), "conv2d channel mismatch: input " + shape_str(input.shape()) +
                                                   " vs kernels " + shape_str(kernels.shape()));
  ConvGeom g{};
  g.n = input.dim(0);
  g.cin = input.dim(1);
  g.h = input.dim(2);
  g.w = input.dim(3);
  g.cout = kernels.dim(0);
  g.kh = kernels.dim(2);
  g.kw = kernels.dim(3);
  if (padding == Padding::kSame) {
    MNET_REQUIRE(g.kh % 2 == 1 && g.kw % 2 == 1, "same padding needs odd kernel extents");
    g.ph = g.kh / 2;
    g.pw = g.kw / 2;
    g.oh = g.h;
    g.ow = g.w;
  } else {
    MNET_REQUIRE(g.kh <= g.h && g.kw <= g.w, "valid conv2d kernel larger than input");
    g.ph = g.pw = 0;
    g.oh = g.h - g.kh + 1;
    g.ow = g.w - g.kw + 1;
  }
  if (bias) MNET_REQUIRE(bias->size() == g.cout, "conv2d bias must have Cout entries");

  const bool needs = any_grad(input) || any_grad(kernels) || (bias && any_grad(*bias));
  Tensor& out = make_output(tape, {g.n, g.cout, g.oh, g.ow}, needs);

  const std::size_t in_size = g.cin * g.h * g.w, out_plane = g.oh * g.ow;
  std::vector<double> pad;
  for (std::size_t s = 0; s < g.n; ++s) {
    double* y = out.data().data() + s * g.cout * out_plane;
    if (bias) {
      for (std::size_t c = 0; c < g.cout; ++c) std::fill_n(y + c * out_plane, out_plane, (*bias)[c]);
    }
    pad_planes(input.data().data() + s * in_size, g.cin, g.h, g.w, g.ph, g.pw, g.padded_h(), g.padded_w(), pad);
    correlate(pad.data(), g.cin, g.padded_h(), g.padded_w(), kernels.data().data(), g.cout, g.kh, g.kw, g.oh, g.ow,
              y);
  }

  if (out.requires_grad()) {
    tape.record([&input, &kernels, bias, &out, g] {
      if (!out.has_grad()) return;
      const std::size_t in_size = g.cin * g.h * g.w, out_plane = g.oh * g.ow;
      // The input gradient correlates dY with the flipped, channel-swapped
      // kernels under padding kh-1-ph, which restores the input extent.
      const std::size_t tph = g.kh - 1 - g.ph, tpw = g.kw - 1 - g.pw;
      std::vector<double> flipped;
      if (input.requires_grad()) {
        flipped.resize(kernels.size());
        for (std::size_t co = 0; co < g.cout; ++co)
          for (std::size_t ci = 0; ci < g.cin; ++ci)
            for (std::size_t i = 0; i < g.kh; ++i)
              for (std::size_t j = 0; j < g.kw; ++j)
                flipped[((ci * g.cout + co) * g.kh + (g.kh - 1 - i)) * g.kw + (g.kw - 1 - j)] =
                    kernels[((co * g.cin + ci) * g.kh + i) * g.kw + j];
      }
      std::vector<double> pad;
      for (std::size_t s = 0; s < g.n; ++s) {
        const double* dy = out.grad().data() + s * g.cout * out_plane;
        if (kernels.requires_grad()) {
          pad_planes(input.data().data() + s * in_size, g.cin, g.h, g.w, g.ph, g.pw, g.padded_h(), g.padded_w(), pad);
          kernel_grad(pad.data(), g.cin, g.padded_h(), g.padded_w(), dy, g.cout, g.kh, g.kw, g.oh, g.ow,
                      kernels.ensure_grad().data());
        }
        if (bias && bias->requires_grad()) {
          auto db = bias->ensure_grad();
          for (std::size_t c = 0; c < g.cout; ++c) {
            const double* p = dy + c * out_plane;
            double sum = 0.0;
            for (std::size_t k = 0; k < out_plane; ++k) sum += p[k];
            db[c] += sum;
          }
        }
        if (input.requires_grad()) {
          const std::size_t th = g.oh + 2 * tph, tw = g.ow + 2 * tpw;
          pad_planes(dy, g.cout, g.oh, g.ow, tph, tpw, th, tw, pad);
          correlate(pad.data(), g.cout, th, tw, flipped.data(), g.cin, g.kh, g.kw, g.h, g.w,
                    input.ensure_grad().data() + s * in_size);
        }
      }
    });
  }
  return out;
}

Tensor& affine(Tape& tape, Tensor& input, Tensor& weight, Tensor* bias) {
  MNET_REQUIRE(input.rank() == 2, "affine input must be [N,Din], got " + shape_str(input.shape()));
  MNET_REQUIRE(weight.rank() == 2, "affine weight must be [Dout,Din], got " + shape_str(weight.shape()));
  MNET_REQUIRE(input.dim(1) == weight.dim(1), "affine dimension mismatch: input " + shape_str(input.shape()) +
                                                  " vs weight " + shape_str(weight.shape()));
  const std::size_t n = input.dim(0), din = input.dim(1), dout = weight.dim(0);
  if (bias) MNET_REQUIRE(bias->size() == dout, "affine bias must have Dout entries");
  const bool needs = any_grad(input) || any_grad(weight) || (bias && any_grad(*bias));
  Tensor& out = make_output(tape, {n, dout}, needs);

  CMapMat X(input.data().data(), n, din);
  CMapMat W(weight.data().data(), dout, din);
  MapMat Y(out.data().data(), n, dout);
  Y.noalias() = X * W.transpose();
  if (bias) {
    Eigen::Map<const Eigen::RowVectorXd> b(bias->data().data(), dout);
    Y.rowwise() += b;
  }

  if (out.requires_grad()) {
    tape.record([&input, &weight, bias, &out, n, din, dout] {
      if (!out.has_grad()) return;
      CMapMat dY(out.grad().data(), n, dout);
      if (weight.requires_grad()) {
        MapMat dW(weight.ensure_grad().data(), dout, din);
        dW.noalias() += dY.transpose() * CMapMat(input.data().data(), n, din);
      }
      if (bias && bias->requires_grad()) {
        Eigen::Map<Eigen::RowVectorXd> db(bias->ensure_grad().data(), dout);
        db += dY.colwise().sum();
      }
      if (input.requires_grad()) {
        MapMat dX(input.ensure_grad().data(), n, din);
        dX.noalias() += dY * CMapMat(weight.data().data(), dout, din);
      }
    });
  }
  return out;
}

Tensor& batch_norm(Tape& tape, Tensor& input, Tensor& gamma, Tensor& beta, Tensor& running_mean,
                   Tensor& running_var, Mode mode, const BatchNormOptions& opts) {
  MNET_REQUIRE(input.rank() == 4, "batch_norm input must be [N,C,H,W], got " + shape_str(input.shape()));
  const std::size_t n = input.dim(0), c = input.dim(1), hw = input.dim(2) * input.dim(3);
  MNET_REQUIRE(gamma.size() == c && beta.size() == c && running_mean.size() == c && running_var.size() == c,
               "batch_norm per-channel tensors must have C entries");
  MNET_REQUIRE(mode == Mode::kEval || n >= 2, "batch_norm in train mode needs a batch of at least 2");

  const bool needs = any_grad(input) || any_grad(gamma) || any_grad(beta);
  Tensor& out = make_output(tape, input.shape(), needs);
  const double m = static_cast<double>(n * hw);

  std::vector<double> mean(c), inv_std(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    if (mode == Mode::kTrain) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double* p = input.data().data() + (i * c + ch) * hw;
        for (std::size_t j = 0; j < hw; ++j) s += p[j];
      }
      const double mu = s / m;
      double v = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double* p = input.data().data() + (i * c + ch) * hw;
        for (std::size_t j = 0; j < hw; ++j) v += (p[j] - mu) * (p[j] - mu);
      }
      v /= m;
      mean[ch] = mu;
      inv_std[ch] = 1.0 / std::sqrt(v + opts.eps);
      running_mean[ch] = opts.momentum * running_mean[ch] + (1.0 - opts.momentum) * mu;
      running_var[ch] = opts.momentum * running_var[ch] + (1.0 - opts.momentum) * v * m / (m - 1.0);
    } else {
      mean[ch] = running_mean[ch];
      inv_std[ch] = 1.0 / std::sqrt(running_var[ch] + opts.eps);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double* p = input.data().data() + (i * c + ch) * hw;
      double* q = out.data().data() + (i * c + ch) * hw;
      const double g = gamma[ch] * inv_std[ch], b = beta[ch] - mean[ch] * g;
      for (std::size_t j = 0; j < hw; ++j) q[j] = p[j] * g + b;
    }
  }

  if (out.requires_grad()) {
    tape.record([&input, &gamma, &beta, &out, mean, inv_std, mode, n, c, hw, m] {
      if (!out.has_grad()) return;
      const double* x = input.data().data();
      const double* dy = out.grad().data();
      double* dx = input.requires_grad() ? input.ensure_grad().data() : nullptr;
      for (std::size_t ch = 0; ch < c; ++ch) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t off = (i * c + ch) * hw;
          for (std::size_t j = 0; j < hw; ++j) {
            const double xhat = (x[off + j] - mean[ch]) * inv_std[ch];
            sum_dy += dy[off + j];
            sum_dy_xhat += dy[off + j] * xhat;
          }
        }
        if (gamma.requires_grad()) gamma.ensure_grad()[ch] += sum_dy_xhat;
        if (beta.requires_grad()) beta.ensure_grad()[ch] += sum_dy;
        if (!dx) continue;
        const double g = gamma[ch] * inv_std[ch];
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t off = (i * c + ch) * hw;
          for (std::size_t j = 0; j < hw; ++j) {
            if (mode == Mode::kTrain) {
              const double xhat = (x[off + j] - mean[ch]) * inv_std[ch];
              dx[off + j] += g * (dy[off + j] - sum_dy / m - xhat * sum_dy_xhat / m);
            } else {
              dx[off + j] += g * dy[off + j];
            }
          }
        }
      }
    });
  }
  return out;
}

Tensor& tanh(Tape& tape, Tensor& input) {
  Tensor& out = make_output(tape, input.shape(), input.requires_grad());
  auto x = input.data();
  auto y = out.data();
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::tanh(x[i]);
  if (out.requires_grad()) {
    tape.record([&input, &out] {
      if (!out.has_grad()) return;
      auto dx = input.ensure_grad();
      auto dy = out.grad();
      auto y = out.data();
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i] * (1.0 - y[i] * y[i]);
    });
  }
  return out;
}

Tensor& leaky_relu(Tape& tape, Tensor& input, double slope) {
  Tensor& out = make_output(tape, input.shape(), input.requires_grad());
  auto x = input.data();
  auto y = out.data();
  // Written as max/min so the loop vectorizes instead of branching on sign.
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::max(x[i], 0.0) + slope * std::min(x[i], 0.0);
  if (out.requires_grad()) {
    tape.record([&input, &out, slope] {
      if (!out.has_grad()) return;
      auto dx = input.ensure_grad();
      auto dy = out.grad();
      auto x = input.data();
      for (std::size_t i = 0; i < dx.size(); ++i) {
        const double g = x[i] > 0.0 ? 1.0 : slope;
        dx[i] += g * dy[i];
      }
    });
  }
  return out;
}

Tensor& reshape(Tape& tape, Tensor& input, Shape shape) {
  MNET_REQUIRE(shape_numel(shape) == input.size(),
               "cannot reshape " + shape_str(input.shape()) + " to " + shape_str(shape));
  Tensor& out = make_output(tape, std::move(shape), input.requires_grad());
  std::copy(input.data().begin(), input.data().end(), out.data().begin());
  if (out.requires_grad()) {
    tape.record([&input, &out] {
      if (!out.has_grad()) return;
      auto dx = input.ensure_grad();
      auto dy = out.grad();
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i];
    });
  }
  return out;
}

Tensor& add(Tape& tape, Tensor& a, Tensor& b) {
  MNET_REQUIRE(a.shape() == b.shape(), "add shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  Tensor& out = make_output(tape, a.shape(), a.requires_grad() || b.requires_grad());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  if (out.requires_grad()) {
    tape.record([&a, &b, &out] {
      if (!out.has_grad()) return;
      auto dy = out.grad();
      for (Tensor* t : {&a, &b}) {
        if (!t->requires_grad()) continue;
        auto dx = t->ensure_grad();
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i];
      }
    });
  }
  return out;
}

Tensor& weighted_sum(Tape& tape, Tensor& input, const Tensor& weights) {
  MNET_REQUIRE(input.shape() == weights.shape(), "weighted_sum shape mismatch");
  Tensor& out = make_output(tape, {1}, input.requires_grad());
  double s = 0.0;
  for (std::size_t i = 0; i < input.size(); ++i) s += input[i] * weights[i];
  out[0] = s;
  if (out.requires_grad()) {
    tape.record([&input, &weights, &out] {
      if (!out.has_grad()) return;
      const double g = out.grad()[0];
      auto dx = input.ensure_grad();
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += g * weights[i];
    });
  }
  return out;
}

Tensor& mse_loss(Tape& tape, Tensor& pred, const Tensor& target) {
  MNET_REQUIRE(pred.shape() == target.shape(),
               "mse_loss shape mismatch " + shape_str(pred.shape()) + " vs " + shape_str(target.shape()));
  Tensor& out = make_output(tape, {1}, pred.requires_grad());
  const double inv_n = 1.0 / static_cast<double>(pred.dim(0));
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    s += d * d;
  }
  out[0] = s * inv_n;
  if (out.requires_grad()) {
    tape.record([&pred, &target, &out, inv_n] {
      if (!out.has_grad()) return;
      const double g = 2.0 * inv_n * out.grad()[0];
      auto dx = pred.ensure_grad();
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += g * (pred[i] - target[i]);
    });
  }
  return out;
}

}  // namespace mnet
