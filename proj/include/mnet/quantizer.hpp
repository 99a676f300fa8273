#pragma once

#include <cstdint>
#include <string>

#include "mnet/tensor.hpp"

namespace mnet {

enum class QuantMode { kMuLaw, kUniform };

const char* quant_mode_name(QuantMode mode);
QuantMode parse_quant_mode(const std::string& text);

/// b-bit quantizer over [-1,1] with step 2^(1-b). bits == 32 means the
/// codeword passes through untouched.
struct QuantizerSpec {
  unsigned bits = 32;
  double mu = 255.0;
  QuantMode mode = QuantMode::kMuLaw;

  static constexpr unsigned kPassthroughBits = 32;
  bool passthrough() const { return bits == kPassthroughBits; }
  double step() const;
  void validate() const;
};

/// sgn(x) ln(1 + mu|x|) / ln(1 + mu). |x| > 1 saturates to sgn(x) and bumps
/// *clips when given.
double compand(double x, double mu, std::size_t* clips = nullptr);
/// Exact inverse of compand on [-1,1].
double expand(double y, double mu);
/// step * round(y / step), ties to even.
double quantize(double y, double step);

struct QuantizedCodeword {
  Tensor values;                 // same shape as the input codeword
  std::uint64_t bits_per_sample = 0;
  std::size_t clipped = 0;       // entries that fell outside the scale
};

/// Scales [N,L] by 1/scale, compands (mu-law mode), quantizes, expands and
/// scales back. `scale` is the stored max |codeword| of the training set.
QuantizedCodeword quantize_codeword(const Tensor& codeword, const QuantizerSpec& spec, double scale);

}  // namespace mnet
