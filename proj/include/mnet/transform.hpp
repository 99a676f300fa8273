#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "mnet/tensor.hpp"

namespace mnet {

using cplx = std::complex<double>;
using CMatrix = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Unitary DFT matrix, F[j,k] = exp(-2*pi*i*j*k/n) / sqrt(n). Cached per size.
const CMatrix& unitary_dft(std::size_t n);

/// Spatial-frequency [Nf,Nb] to angular-delay [Nf,Nb]: F_d^H * hf * F_a.
CMatrix forward_dft(const CMatrix& hf);
/// Keeps the first `rows` delay rows.
CMatrix truncate(const CMatrix& hd, std::size_t rows);
/// Truncated angular-delay [Rd,Nb] back to spatial-frequency [Nf,Nb]:
/// zero-pads to Nf rows, then F_d * h * F_a^H.
CMatrix to_spatial_frequency(const CMatrix& hd, std::size_t nf);

/// Counts entries that land outside [-1,1] after range normalization.
struct ClipCounter {
  std::size_t clipped = 0;
  std::size_t total = 0;
  double fraction() const { return total ? static_cast<double>(clipped) / static_cast<double>(total) : 0.0; }
};

/// `count` row-major [rows,cols] complex matrices -> [count,2,rows,cols],
/// channel 0 real part, channel 1 imaginary part.
Tensor complex_to_real(std::span<const cplx> values, std::size_t count, std::size_t rows, std::size_t cols);
/// Inverse of complex_to_real.
std::vector<cplx> real_to_complex(const Tensor& t);

/// Divides by one stored scale so training data lands in [-1,1].
struct RangeNormalizer {
  double scale = 1.0;

  /// scale = max |entry| of `data`.
  static RangeNormalizer fit(const Tensor& data);
  /// Values beyond [-1,1] are kept as they are and counted, never clipped.
  Tensor normalize(const Tensor& x, ClipCounter* clips = nullptr) const;
  Tensor denormalize(const Tensor& x) const;
};

}  // namespace mnet
