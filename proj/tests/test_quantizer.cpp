#include <gtest/gtest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "mnet/error.hpp"
#include "mnet/quantizer.hpp"

using namespace mnet;

TEST(Compand, Endpoints) {
  EXPECT_EQ(compand(0.0, 255), 0.0);
  EXPECT_DOUBLE_EQ(compand(1.0, 255), 1.0);
  EXPECT_DOUBLE_EQ(compand(-1.0, 255), -1.0);
  EXPECT_EQ(expand(0.0, 255), 0.0);
}

TEST(Compand, HalfAtDefaultMu) {
  const double v = compand(0.5, 255);
  EXPECT_NEAR(v, std::log(128.5) / std::log(256.0), 1e-15);
  EXPECT_NEAR(v, 0.87570, 1e-5);
}

TEST(Compand, OddMonotoneAndInvertible) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  double prev_x = -1, prev_y = -1;
  for (int i = 0; i <= 2000; ++i) {
    const double x = -1 + i * 1e-3;
    const double y = compand(x, 255);
    if (i) {
      EXPECT_GT(y, prev_y);
    }
    prev_x = x;
    prev_y = y;
  }
  (void)prev_x;
  for (double mu : {1.0, 87.6, 255.0}) {
    for (int i = 0; i < 1000; ++i) {
      const double x = u(rng);
      EXPECT_EQ(compand(-x, mu), -compand(x, mu));
      EXPECT_NEAR(expand(compand(x, mu), mu), x, 1e-12);
    }
  }
}

TEST(Compand, SaturatesAndCounts) {
  std::size_t clips = 0;
  EXPECT_EQ(compand(1.7, 255, &clips), 1.0);
  EXPECT_EQ(compand(-3.0, 255, &clips), -1.0);
  compand(0.3, 255, &clips);
  EXPECT_EQ(clips, 2u);
}

TEST(Quantize, GridMidpointsAndTies) {
  const double step = 0.25;
  EXPECT_EQ(quantize(0.75, step), 0.75);
  EXPECT_EQ(quantize(-0.5, step), -0.5);
  // Midpoints sit exactly half a step away and round to the even multiple.
  EXPECT_EQ(quantize(0.125, step), 0.0);
  EXPECT_EQ(quantize(0.375, step), 0.5);
  EXPECT_EQ(quantize(-0.125, step), 0.0);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 10000; ++i) {
    const double y = u(rng);
    EXPECT_LE(std::abs(quantize(y, step) - y), step / 2);
  }
  EXPECT_THROW(quantize(0.1, 0.0), ContractViolation);
}

TEST(QuantizerSpec, StepAndValidation) {
  for (unsigned b = 1; b <= 16; ++b) {
    QuantizerSpec s;
    s.bits = b;
    EXPECT_DOUBLE_EQ(s.step() * std::ldexp(1.0, static_cast<int>(b) - 1), 1.0);
  }
  QuantizerSpec bad;
  bad.bits = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad.bits = 17;
  EXPECT_THROW(bad.validate(), ConfigError);
  QuantizerSpec neg;
  neg.bits = 4;
  neg.mu = -1;
  EXPECT_THROW(neg.validate(), ConfigError);
  EXPECT_EQ(parse_quant_mode("uniform"), QuantMode::kUniform);
  EXPECT_THROW(parse_quant_mode("log"), ConfigError);
}

TEST(Quantize, UniformDataNoiseMatchesStepFormula) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  for (unsigned b : {11u, 14u}) {
    const double step = std::ldexp(1.0, 1 - static_cast<int>(b));
    double err = 0, sig = 0;
    for (int i = 0; i < 200000; ++i) {
      const double x = u(rng);
      err += std::pow(quantize(x, step) - x, 2);
      sig += x * x;
    }
    const double measured = 10 * std::log10(err / sig);
    const double predicted = 10 * std::log10(step * step / 12 / (1.0 / 3.0));
    EXPECT_NEAR(measured, predicted, 0.2) << b;
  }
  EXPECT_NEAR(10 * std::log10(std::pow(std::ldexp(1.0, -10), 2) / 4), -66.2, 0.1);
}

TEST(Quantize, MuLawCellErrorBound) {
  const double mu = 255;
  for (unsigned b : {3u, 4u, 6u}) {
    const double step = std::ldexp(1.0, 1 - static_cast<int>(b));
    const double slope0 = std::log1p(mu) / mu;
    for (int i = 0; i <= 20000; ++i) {
      const double x = -1 + i * 1e-4;
      const double yq = quantize(compand(x, mu), step);
      // expand is convex in |y|, so its steepest point in the cell is the outer edge
      const double edge = std::min(1.0, std::abs(yq) + step / 2);
      const double slope = slope0 * std::exp(edge * std::log1p(mu));
      ASSERT_LE(std::abs(x - expand(yq, mu)), step / 2 * slope * (1 + 1e-12) + 1e-15) << x;
    }
  }
}

TEST(Quantize, MuLawBeatsUniformOnPeakedData) {
  std::mt19937_64 rng(4);
  std::exponential_distribution<double> e(30.0);
  std::bernoulli_distribution sign(0.5);
  for (unsigned b : {4u, 6u, 8u}) {
    const double step = std::ldexp(1.0, 1 - static_cast<int>(b));
    double mu_err = 0, uni_err = 0;
    for (int i = 0; i < 50000; ++i) {
      double x = std::min(1.0, e(rng));
      if (sign(rng)) x = -x;
      mu_err += std::pow(expand(quantize(compand(x, 255), step), 255) - x, 2);
      uni_err += std::pow(quantize(x, step) - x, 2);
    }
    EXPECT_LT(mu_err, uni_err) << b;
  }
}

TEST(QuantizeCodeword, PassthroughIsBitIdentical) {
  const Tensor cw = mnet::testing::random_tensor({3, 128}, 5, -4, 4);
  const QuantizedCodeword q = quantize_codeword(cw, QuantizerSpec{}, 0.0);
  for (std::size_t i = 0; i < cw.size(); ++i) EXPECT_EQ(q.values[i], cw[i]);
  EXPECT_EQ(q.bits_per_sample, 128u * 32);
}

TEST(QuantizeCodeword, BitCountAndScaleContract) {
  const Tensor cw = mnet::testing::random_tensor({2, 128}, 6, -2, 2);
  QuantizerSpec s;
  s.bits = 6;
  const QuantizedCodeword q = quantize_codeword(cw, s, 2.0);
  EXPECT_EQ(q.bits_per_sample, 768u);
  EXPECT_EQ(q.clipped, 0u);
  EXPECT_THROW(quantize_codeword(cw, s, 0.0), ContractViolation);
  const QuantizedCodeword small = quantize_codeword(cw, s, 1.0);
  EXPECT_GT(small.clipped, 0u);
  for (double v : small.values.data()) EXPECT_LE(std::abs(v), 1.0);
}

TEST(QuantizeCodeword, ErrorShrinksWithBits) {
  const Tensor cw = mnet::testing::random_tensor({50, 64}, 7, -1, 1);
  double prev = 1e9;
  for (unsigned b : {2u, 4u, 6u, 8u, 12u}) {
    for (QuantMode mode : {QuantMode::kMuLaw, QuantMode::kUniform}) {
      QuantizerSpec s;
      s.bits = b;
      s.mode = mode;
      const QuantizedCodeword q = quantize_codeword(cw, s, 1.0);
      double err = 0;
      for (std::size_t i = 0; i < cw.size(); ++i) err += std::pow(q.values[i] - cw[i], 2);
      if (mode == QuantMode::kMuLaw) {
        EXPECT_LT(err, prev) << b;
        prev = err;
      }
    }
  }
}
