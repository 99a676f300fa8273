#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mnet/tensor.hpp"

namespace mnet {

/// Per-sample Frobenius magnitude and unit-norm direction of a [N,2,R,C] batch.
struct SphericalCsi {
  Tensor directions;
  std::vector<double> magnitudes;
};

/// Throws ZeroChannelError if any sample is all zeros.
SphericalCsi split(const Tensor& csi);
/// magnitude * direction; every direction must have unit norm within 1e-6.
Tensor merge(const SphericalCsi& s);
/// Per-sample Frobenius norms of [N,...].
std::vector<double> sample_norms(const Tensor& x);
/// Multiplies sample k of [N,...] by factors[k]; no norm requirement.
Tensor scale_samples(const Tensor& x, std::span<const double> factors);

/// Uniform quantizer of 20*log10(p) over [min_db, max_db] with 2^bits cells,
/// reconstructing at cell centres.
struct MagnitudeQuantizer {
  unsigned bits = 16;
  double min_db = -60.0;
  double max_db = 60.0;

  double cell_db() const;
  /// Out-of-range (or non-positive) p saturates to the nearest end cell and
  /// sets *saturated when given.
  std::uint32_t encode(double p, bool* saturated = nullptr) const;
  double decode(std::uint32_t code) const;
  void validate() const;
};

}  // namespace mnet
