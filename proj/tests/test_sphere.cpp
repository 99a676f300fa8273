#include <gtest/gtest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "mnet/error.hpp"
#include "mnet/sphere.hpp"

using namespace mnet;
using mnet::testing::random_tensor;

TEST(Sphere, SplitGivesNormAndUnitDirection) {
  Tensor x({1, 2, 1, 2}, std::vector<double>{3, 0, 0, 4});
  const SphericalCsi s = split(x);
  EXPECT_DOUBLE_EQ(s.magnitudes[0], 5.0);
  EXPECT_NEAR(sample_norms(s.directions)[0], 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(s.directions[3], 0.8);
}

TEST(Sphere, MergeInvertsSplit) {
  const Tensor x = random_tensor({7, 2, 4, 5}, 3, -3, 3);
  const SphericalCsi s = split(x);
  for (double n : sample_norms(s.directions)) EXPECT_NEAR(n, 1.0, 1e-9);
  const Tensor y = merge(s);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y[i], x[i], 1e-12);
}

TEST(Sphere, MergeWithUnitMagnitudeReturnsDirection) {
  const SphericalCsi s0 = split(random_tensor({2, 2, 3, 3}, 4));
  SphericalCsi s = s0;
  s.magnitudes.assign(2, 1.0);
  const Tensor y = merge(s);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_EQ(y[i], s.directions[i]);
}

TEST(Sphere, ScaleEquivariance) {
  const Tensor x = random_tensor({1, 2, 8, 8}, 5);
  for (double c : {1e-3, 1.0, 7.5, 1e3}) {
    const Tensor cx = scale_samples(x, std::vector<double>{c});
    const SphericalCsi a = split(x), b = split(cx);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(a.directions[i], b.directions[i], 1e-12);
    EXPECT_NEAR(b.magnitudes[0] / a.magnitudes[0], c, 1e-12 * c);
  }
}

TEST(Sphere, ZeroChannelIsAnError) {
  Tensor x = random_tensor({3, 2, 2, 2}, 6);
  for (std::size_t i = 8; i < 16; ++i) x[i] = 0.0;
  EXPECT_THROW(split(x), ZeroChannelError);
}

TEST(Sphere, MergeRejectsNonUnitDirection) {
  SphericalCsi s = split(random_tensor({1, 2, 2, 2}, 7));
  s.directions[0] += 1e-3;
  EXPECT_THROW(merge(s), ContractViolation);
  SphericalCsi ok = split(random_tensor({1, 2, 2, 2}, 7));
  ok.directions[0] += 1e-9;
  EXPECT_NO_THROW(merge(ok));
}

TEST(Sphere, DirectionMseEqualsNmseWithExactMagnitude) {
  const Tensor x = random_tensor({5, 2, 4, 4}, 8, -10, 10);
  const SphericalCsi s = split(x);
  const Tensor noisy = random_tensor({5, 2, 4, 4}, 9, -0.05, 0.05);
  for (std::size_t k = 0; k < 5; ++k) {
    double mse = 0, err = 0, ref = 0;
    for (std::size_t i = 0; i < 32; ++i) {
      const std::size_t j = k * 32 + i;
      const double dhat = s.directions[j] + noisy[j];
      mse += (dhat - s.directions[j]) * (dhat - s.directions[j]);
      const double xhat = s.magnitudes[k] * dhat;
      err += (xhat - x[j]) * (xhat - x[j]);
      ref += x[j] * x[j];
    }
    EXPECT_NEAR(mse, err / ref, 1e-12);
  }
}

TEST(MagnitudeQuantizer, GridPointsRoundTripExactly) {
  MagnitudeQuantizer q;
  for (std::uint32_t code : {0u, 1u, 12345u, 65535u}) {
    const double p = q.decode(code);
    bool sat = true;
    EXPECT_EQ(q.encode(p, &sat), code);
    EXPECT_FALSE(sat);
    EXPECT_EQ(q.decode(q.encode(p)), p);
  }
}

TEST(MagnitudeQuantizer, LogErrorWithinHalfCell) {
  for (unsigned bits : {4u, 8u, 16u}) {
    MagnitudeQuantizer q;
    q.bits = bits;
    const double bound = (q.max_db - q.min_db) / std::ldexp(1.0, static_cast<int>(bits) + 1);
    std::mt19937_64 rng(bits);
    std::uniform_real_distribution<double> db(q.min_db, q.max_db);
    for (int i = 0; i < 5000; ++i) {
      const double p = std::pow(10.0, db(rng) / 20.0);
      const double err = std::abs(20 * std::log10(q.decode(q.encode(p))) - 20 * std::log10(p));
      ASSERT_LE(err, bound * (1 + 1e-9));
    }
  }
}

TEST(MagnitudeQuantizer, EightBitsOverFortyDbStaysUnderOnePercent) {
  MagnitudeQuantizer q;
  q.bits = 8;
  q.min_db = -20;
  q.max_db = 20;
  for (int i = 0; i <= 40000; ++i) {
    const double p = std::pow(10.0, (-20.0 + i * 1e-3) / 20.0);
    ASSERT_LT(std::abs(q.decode(q.encode(p)) / p - 1.0), 0.01) << p;
  }
}

TEST(MagnitudeQuantizer, MergeErrorBoundedByHalfStep) {
  MagnitudeQuantizer q;
  q.bits = 8;
  const double half_db = q.cell_db() / 2;
  const Tensor x = random_tensor({20, 2, 4, 4}, 11);
  Tensor spread = x;
  std::vector<double> f(20);
  for (std::size_t k = 0; k < 20; ++k) f[k] = std::pow(10.0, (static_cast<double>(k) * 2.0 - 20.0) / 20.0);
  spread = scale_samples(x, f);
  SphericalCsi s = split(spread);
  for (double& p : s.magnitudes) p = q.decode(q.encode(p));
  const Tensor y = merge(s);
  const auto nt = sample_norms(spread);
  for (std::size_t k = 0; k < 20; ++k) {
    double err = 0;
    for (std::size_t i = 0; i < 32; ++i) err += std::pow(y[k * 32 + i] - spread[k * 32 + i], 2);
    EXPECT_LE(std::sqrt(err) / nt[k], std::pow(10.0, half_db / 20) - 1 + 1e-12);
  }
}

TEST(MagnitudeQuantizer, SaturatesAndFlags) {
  MagnitudeQuantizer q;
  bool sat = false;
  EXPECT_EQ(q.encode(1e-9, &sat), 0u);
  EXPECT_TRUE(sat);
  EXPECT_EQ(q.encode(1e9, &sat), 65535u);
  EXPECT_TRUE(sat);
  EXPECT_EQ(q.encode(0.0, &sat), 0u);
  EXPECT_TRUE(sat);
  q.encode(1.0, &sat);
  EXPECT_FALSE(sat);
  EXPECT_THROW(q.decode(70000), ContractViolation);
}
