#include "mnet/quantizer.hpp"

#include <cfenv>
#include <cmath>

#include "mnet/error.hpp"

namespace mnet {

const char* quant_mode_name(QuantMode mode) { return mode == QuantMode::kMuLaw ? "mu_law" : "uniform"; }

QuantMode parse_quant_mode(const std::string& text) {
  if (text == "mu_law" || text == "mu") return QuantMode::kMuLaw;
  if (text == "uniform") return QuantMode::kUniform;
  throw ConfigError("unknown quantizer mode '" + text + "'");
}

void QuantizerSpec::validate() const {
  if (!passthrough() && (bits < 1 || bits > 16))
    throw ConfigError("quantizer bits must lie in [1,16] or equal 32, got " + std::to_string(bits));
  if (mode == QuantMode::kMuLaw && !(mu > 0.0 && std::isfinite(mu))) throw ConfigError("mu must be positive");
}

double QuantizerSpec::step() const {
  validate();
  return std::ldexp(1.0, 1 - static_cast<int>(bits));
}

double compand(double x, double mu, std::size_t* clips) {
  if (std::abs(x) > 1.0) {
    if (clips) ++*clips;
    x = x > 0.0 ? 1.0 : -1.0;
  }
  return std::copysign(std::log1p(mu * std::abs(x)) / std::log1p(mu), x);
}

double expand(double y, double mu) {
  return std::copysign(std::expm1(std::abs(y) * std::log1p(mu)) / mu, y);
}

double quantize(double y, double step) {
  MNET_REQUIRE(step > 0.0, "quantizer step must be positive");
  // nearbyint honours the current rounding mode, which defaults to ties-to-even.
  return step * std::nearbyint(y / step);
}

QuantizedCodeword quantize_codeword(const Tensor& codeword, const QuantizerSpec& spec, double scale) {
  spec.validate();
  MNET_REQUIRE(codeword.rank() == 2, "codeword must be [N,L]");
  QuantizedCodeword out;
  out.values = codeword;
  out.values.set_requires_grad(false);
  out.values.drop_grad();
  const std::size_t l = codeword.dim(1);
  if (spec.passthrough()) {
    out.bits_per_sample = static_cast<std::uint64_t>(l) * QuantizerSpec::kPassthroughBits;
    return out;
  }
  MNET_REQUIRE(scale > 0.0 && std::isfinite(scale), "codeword scale missing");
  MNET_REQUIRE(std::fegetround() == FE_TONEAREST, "rounding mode must be round-to-nearest");
  const double step = spec.step();
  for (double& v : out.values.data()) {
    double x = v / scale;
    if (spec.mode == QuantMode::kMuLaw) {
      v = scale * expand(quantize(compand(x, spec.mu, &out.clipped), step), spec.mu);
    } else {
      if (std::abs(x) > 1.0) {
        ++out.clipped;
        x = x > 0.0 ? 1.0 : -1.0;
      }
      v = scale * quantize(x, step);
    }
  }
  out.bits_per_sample = static_cast<std::uint64_t>(l) * spec.bits;
  return out;
}

}  // namespace mnet
