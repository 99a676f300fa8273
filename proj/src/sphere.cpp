#include "mnet/sphere.hpp"

#include <cmath>

#include "mnet/error.hpp"

namespace mnet {

std::vector<double> sample_norms(const Tensor& x) {
  MNET_REQUIRE(x.rank() >= 1, "expected a batch");
  const std::size_t n = x.dim(0), per = x.size() / n;
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < per; ++i) s += x[k * per + i] * x[k * per + i];
    out[k] = std::sqrt(s);
  }
  return out;
}

Tensor scale_samples(const Tensor& x, std::span<const double> factors) {
  MNET_REQUIRE(x.rank() >= 1 && factors.size() == x.dim(0), "one factor per sample required");
  Tensor out = x;
  out.set_requires_grad(false);
  out.drop_grad();
  const std::size_t per = x.size() / x.dim(0);
  for (std::size_t k = 0; k < factors.size(); ++k)
    for (std::size_t i = 0; i < per; ++i) out[k * per + i] *= factors[k];
  return out;
}

SphericalCsi split(const Tensor& csi) {
  SphericalCsi s;
  s.magnitudes = sample_norms(csi);
  std::vector<double> inv(s.magnitudes.size());
  for (std::size_t k = 0; k < inv.size(); ++k) {
    if (!(s.magnitudes[k] > 0.0)) throw ZeroChannelError("sample " + std::to_string(k) + " has zero norm");
    inv[k] = 1.0 / s.magnitudes[k];
  }
  s.directions = scale_samples(csi, inv);
  return s;
}

Tensor merge(const SphericalCsi& s) {
  const auto norms = sample_norms(s.directions);
  for (std::size_t k = 0; k < norms.size(); ++k) {
    MNET_REQUIRE(std::abs(norms[k] - 1.0) <= 1e-6, "direction " + std::to_string(k) + " is not unit norm");
    MNET_REQUIRE(s.magnitudes[k] > 0.0, "magnitude must be positive");
  }
  return scale_samples(s.directions, s.magnitudes);
}

void MagnitudeQuantizer::validate() const {
  MNET_REQUIRE(bits >= 1 && bits <= 31, "magnitude bits must lie in [1,31]");
  MNET_REQUIRE(max_db > min_db, "magnitude dB range is empty");
}

double MagnitudeQuantizer::cell_db() const { return (max_db - min_db) / std::ldexp(1.0, static_cast<int>(bits)); }

std::uint32_t MagnitudeQuantizer::encode(double p, bool* saturated) const {
  validate();
  const std::uint32_t top = (std::uint32_t{1} << bits) - 1;
  bool sat = false;
  std::uint32_t code;
  if (!(p > 0.0)) {
    sat = true;
    code = 0;
  } else {
    const double db = 20.0 * std::log10(p);
    if (db < min_db) {
      sat = true;
      code = 0;
    } else if (db > max_db) {
      sat = true;
      code = top;
    } else {
      const double cell = std::floor((db - min_db) / cell_db());
      code = static_cast<std::uint32_t>(std::min(cell, static_cast<double>(top)));
    }
  }
  if (saturated) *saturated = sat;
  return code;
}

double MagnitudeQuantizer::decode(std::uint32_t code) const {
  validate();
  MNET_REQUIRE(code <= (std::uint32_t{1} << bits) - 1, "magnitude code out of range");
  const double db = min_db + (static_cast<double>(code) + 0.5) * cell_db();
  return std::pow(10.0, db / 20.0);
}

}  // namespace mnet
