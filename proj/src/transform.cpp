#include "mnet/transform.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include "mnet/error.hpp"

namespace mnet {

const CMatrix& unitary_dft(std::size_t n) {
  MNET_REQUIRE(n > 0, "DFT size must be positive");
  static std::mutex mu;
  static std::map<std::size_t, std::unique_ptr<CMatrix>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[n];
  if (!slot) {
    slot = std::make_unique<CMatrix>(n, n);
    const double norm = 1.0 / std::sqrt(static_cast<double>(n));
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < n; ++k) {
        // Reduce j*k mod n first so large sizes keep full phase accuracy.
        const double phase = -2.0 * std::numbers::pi * static_cast<double>((j * k) % n) / static_cast<double>(n);
        (*slot)(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = std::polar(norm, phase);
      }
    }
  }
  return *slot;
}

CMatrix forward_dft(const CMatrix& hf) {
  const CMatrix& fd = unitary_dft(static_cast<std::size_t>(hf.rows()));
  const CMatrix& fa = unitary_dft(static_cast<std::size_t>(hf.cols()));
  return fd.adjoint() * hf * fa;
}

CMatrix truncate(const CMatrix& hd, std::size_t rows) {
  MNET_REQUIRE(rows >= 1 && rows <= static_cast<std::size_t>(hd.rows()), "cannot keep more rows than present");
  return hd.topRows(static_cast<Eigen::Index>(rows));
}

CMatrix to_spatial_frequency(const CMatrix& hd, std::size_t nf) {
  MNET_REQUIRE(static_cast<std::size_t>(hd.rows()) <= nf, "retained rows exceed subcarrier count");
  const CMatrix& fd = unitary_dft(nf);
  const CMatrix& fa = unitary_dft(static_cast<std::size_t>(hd.cols()));
  // Only the first Rd columns of F_d meet nonzero rows.
  return fd.leftCols(hd.rows()) * hd * fa.adjoint();
}

Tensor complex_to_real(std::span<const cplx> values, std::size_t count, std::size_t rows, std::size_t cols) {
  const std::size_t plane = rows * cols;
  MNET_REQUIRE(values.size() == count * plane, "complex buffer does not match count*rows*cols");
  Tensor out({count, 2, rows, cols});
  auto d = out.data();
  for (std::size_t s = 0; s < count; ++s) {
    const cplx* src = values.data() + s * plane;
    double* re = d.data() + s * 2 * plane;
    double* im = re + plane;
    for (std::size_t i = 0; i < plane; ++i) {
      re[i] = src[i].real();
      im[i] = src[i].imag();
    }
  }
  return out;
}

std::vector<cplx> real_to_complex(const Tensor& t) {
  MNET_REQUIRE(t.rank() == 4 && t.dim(1) == 2, "expected [N,2,rows,cols]");
  const std::size_t n = t.dim(0), plane = t.dim(2) * t.dim(3);
  std::vector<cplx> out(n * plane);
  for (std::size_t s = 0; s < n; ++s) {
    const double* re = t.data().data() + s * 2 * plane;
    const double* im = re + plane;
    for (std::size_t i = 0; i < plane; ++i) out[s * plane + i] = {re[i], im[i]};
  }
  return out;
}

RangeNormalizer RangeNormalizer::fit(const Tensor& data) {
  double m = 0.0;
  for (double v : data.data()) m = std::max(m, std::abs(v));
  MNET_REQUIRE(m > 0.0, "cannot fit a range scale to all-zero data");
  return {m};
}

Tensor RangeNormalizer::normalize(const Tensor& x, ClipCounter* clips) const {
  MNET_REQUIRE(scale > 0.0, "range scale must be positive");
  Tensor out = x;
  out.set_requires_grad(false);
  out.drop_grad();
  std::size_t over = 0;
  for (double& v : out.data()) {
    v /= scale;
    over += std::abs(v) > 1.0;
  }
  if (clips) {
    clips->clipped += over;
    clips->total += out.size();
  }
  return out;
}

Tensor RangeNormalizer::denormalize(const Tensor& x) const {
  MNET_REQUIRE(scale > 0.0, "range scale must be positive");
  Tensor out = x;
  out.set_requires_grad(false);
  out.drop_grad();
  for (double& v : out.data()) v *= scale;
  return out;
}

}  // namespace mnet
