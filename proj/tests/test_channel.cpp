#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "mnet/channel.hpp"
#include "mnet/error.hpp"
#include "mnet/transform.hpp"

using namespace mnet;

namespace {

ChannelConfig small(double gamma, std::uint64_t seed = 1) {
  ChannelConfig c;
  c.gamma = gamma;
  c.seed = seed;
  return c;
}

// Trace(E{H_t H_{t-lag}^H}) / E||H_{t-lag}||^2, real part, pooled over samples and slots.
double lag_correlation(const CsiSequence& d, std::size_t lag = 1) {
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < d.samples; ++k)
    for (std::size_t t = lag; t < d.slots; ++t) {
      auto a = d.matrix(k, t);
      auto b = d.matrix(k, t - lag);
      for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] * std::conj(b[i])).real();
        den += std::norm(b[i]);
      }
    }
  return num / den;
}

double energy(std::span<const cplx> m) {
  double e = 0.0;
  for (const cplx& v : m) e += std::norm(v);
  return e;
}

CMatrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  CMatrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = {g(rng), g(rng)};
  return m;
}

}  // namespace

TEST(ChannelConfig, Validation) {
  EXPECT_THROW(generate(small(1.0), 1), ContractViolation);
  EXPECT_THROW(generate(small(-0.1), 1), ContractViolation);
  ChannelConfig c;
  c.num_paths = 32 * 32 + 1;
  EXPECT_THROW(c.validate(), ContractViolation);
  c = ChannelConfig{};
  c.rows = 2048;
  EXPECT_THROW(c.validate(), ContractViolation);
  c = ChannelConfig{};
  c.power_spread_db = -1;
  EXPECT_THROW(c.validate(), ContractViolation);
  EXPECT_THROW(generate(ChannelConfig{}, 0), ContractViolation);
  EXPECT_NO_THROW(ChannelConfig{}.validate());
}

TEST(ChannelConfig, Presets) {
  EXPECT_DOUBLE_EQ(preset_config("slow").gamma, 0.99);
  EXPECT_DOUBLE_EQ(preset_config("fast").gamma, 0.9);
  EXPECT_EQ(preset_config("fast").preset, "fast");
  EXPECT_THROW(preset_config("medium"), ConfigError);
}

TEST(ChannelGenerate, ShapesSupportAndFiniteness) {
  ChannelConfig c = small(0.9);
  const CsiSequence d = generate(c, 20);
  EXPECT_EQ(d.samples, 20u);
  EXPECT_EQ(d.slots, 10u);
  EXPECT_EQ(d.values.size(), 20u * 10 * 32 * 32);
  for (std::size_t k = 0; k < d.samples; ++k) {
    // Every slot lives on the same num_paths cells.
    std::size_t support = 0;
    auto first = d.matrix(k, 0);
    for (std::size_t i = 0; i < first.size(); ++i) {
      if (first[i] != cplx{}) ++support;
      for (std::size_t t = 1; t < d.slots; ++t) EXPECT_EQ(first[i] == cplx{}, d.matrix(k, t)[i] == cplx{});
    }
    EXPECT_EQ(support, c.num_paths);
  }
  for (const cplx& v : d.values) EXPECT_TRUE(std::isfinite(v.real()) && std::isfinite(v.imag()));
}

TEST(ChannelGenerate, SeededAndPrefixStable) {
  const CsiSequence a = generate(small(0.9, 5), 12);
  const CsiSequence b = generate(small(0.9, 5), 12);
  EXPECT_EQ(a.values, b.values);
  const CsiSequence prefix = generate(small(0.9, 5), 4);
  for (std::size_t i = 0; i < prefix.values.size(); ++i) ASSERT_EQ(prefix.values[i], a.values[i]);
  const CsiSequence other = generate(small(0.9, 6), 12);
  EXPECT_NE(a.values, other.values);
}

TEST(ChannelGenerate, PowerSpreadFollowsMetadata) {
  ChannelConfig c = small(0.5);
  c.power_spread_db = 40;
  const CsiSequence d = generate(c, 200);
  double lo = 1e9, hi = -1e9;
  for (double p : d.power_db) {
    lo = std::min(lo, p);
    hi = std::max(hi, p);
  }
  EXPECT_GE(lo, -20.0);
  EXPECT_LE(hi, 20.0);
  EXPECT_GT(hi - lo, 30.0);
  c.power_spread_db = 0;
  const CsiSequence flat = generate(c, 5);
  for (double p : flat.power_db) EXPECT_EQ(p, 0.0);
}

TEST(ChannelGenerate, IndependentSlotsAreUncorrelated) {
  const std::size_t k = 2000;
  const CsiSequence d = generate(small(0.0, 3), k);
  EXPECT_LT(std::abs(lag_correlation(d)), 3.0 / std::sqrt(static_cast<double>(k)));
}

TEST(ChannelGenerate, LagOneCorrelationMatchesGamma) {
  const CsiSequence d = generate(small(0.95, 4), 2000);
  const double rho = lag_correlation(d);
  EXPECT_GE(rho, 0.94);
  EXPECT_LE(rho, 0.96);
}

TEST(ChannelGenerate, PowerIsStationary) {
  const CsiSequence d = generate(small(0.95, 7), 2000);
  std::vector<double> per_slot(d.slots, 0.0);
  for (std::size_t k = 0; k < d.samples; ++k)
    for (std::size_t t = 0; t < d.slots; ++t) per_slot[t] += energy(d.matrix(k, t));
  for (std::size_t t = 1; t < d.slots; ++t) EXPECT_NEAR(per_slot[t] / per_slot[0], 1.0, 0.05) << "slot " << t;
}

TEST(ChannelGenerate, InnovationIsUncorrelatedWithPast) {
  const std::size_t k = 2000;
  const double gamma = 0.9;
  const CsiSequence d = generate(small(gamma, 8), k);
  double cross = 0.0, ev = 0.0, eh = 0.0;
  for (std::size_t s = 0; s < k; ++s)
    for (std::size_t t = 1; t < d.slots; ++t) {
      auto cur = d.matrix(s, t);
      auto prev = d.matrix(s, t - 1);
      for (std::size_t i = 0; i < cur.size(); ++i) {
        const cplx v = cur[i] - gamma * prev[i];
        cross += (v * std::conj(prev[i])).real();
        ev += std::norm(v);
        eh += std::norm(prev[i]);
      }
    }
  EXPECT_LT(std::abs(cross) / std::sqrt(ev * eh), 3.0 / std::sqrt(static_cast<double>(k)));
}

TEST(ChannelDataset, FileRoundTrip) {
  ChannelConfig c = small(0.9, 2);
  c.preset = "fast";
  const CsiSequence d = generate(c, 6);
  const auto dir = std::filesystem::temp_directory_path() / "mnet_dataset_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "d.bin").string();
  save_dataset(d, path);
  save_dataset_manifest(c, 6, (dir / "d.manifest").string());
  const CsiSequence back = load_dataset(path);
  EXPECT_EQ(back.samples, 6u);
  EXPECT_EQ(back.slots, d.slots);
  EXPECT_EQ(back.preset, "fast");
  EXPECT_EQ(back.gamma, 0.9);
  EXPECT_EQ(back.seeds, d.seeds);
  EXPECT_EQ(back.power_db, d.power_db);
  for (std::size_t i = 0; i < d.values.size(); ++i) {
    EXPECT_EQ(back.values[i].real(), static_cast<float>(d.values[i].real()));
    EXPECT_EQ(back.values[i].imag(), static_cast<float>(d.values[i].imag()));
  }
  std::ifstream m(dir / "d.manifest");
  std::string all((std::istreambuf_iterator<char>(m)), {});
  EXPECT_NE(all.find("gamma=0.9"), std::string::npos);
  EXPECT_NE(all.find("seed=2"), std::string::npos);

  {
    std::ofstream bad(path, std::ios::binary);
    bad << "CSIDSET1" << "abc";
  }
  EXPECT_THROW(load_dataset(path), IoError);
  std::filesystem::remove_all(dir);
  EXPECT_THROW(load_dataset(path), IoError);
}

TEST(ChannelDataset, SubsetAndSlotTensor) {
  const CsiSequence d = generate(small(0.9), 5);
  const CsiSequence s = d.subset(1, 3);
  EXPECT_EQ(s.samples, 2u);
  EXPECT_EQ(s.matrix(0, 4)[7], d.matrix(1, 4)[7]);
  EXPECT_THROW(d.subset(3, 9), ContractViolation);
  const Tensor t = d.slot_tensor(2);
  EXPECT_EQ(t.shape(), (Shape{5, 2, 32, 32}));
  const cplx v = d.matrix(4, 2)[33];
  EXPECT_EQ(t[((4 * 2 + 0) * 32 + 1) * 32 + 1], v.real());
  EXPECT_EQ(t[((4 * 2 + 1) * 32 + 1) * 32 + 1], v.imag());
}

TEST(Transform, DftIsUnitary) {
  for (std::size_t n : {1u, 7u, 32u}) {
    const CMatrix& f = unitary_dft(n);
    const CMatrix eye = f * f.adjoint();
    EXPECT_LT((eye - CMatrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n))).norm(), 1e-12);
  }
  EXPECT_EQ(&unitary_dft(32), &unitary_dft(32));
}

TEST(Transform, ZeroMapsToZero) {
  const CMatrix z = CMatrix::Zero(64, 8);
  EXPECT_EQ(forward_dft(z).norm(), 0.0);
  EXPECT_EQ(to_spatial_frequency(CMatrix::Zero(16, 8), 64).norm(), 0.0);
}

TEST(Transform, NormPreservedAndRoundTrip) {
  const CMatrix hd = random_matrix(32, 32, 1);
  const CMatrix hf = to_spatial_frequency(hd, 1024);
  EXPECT_EQ(hf.rows(), 1024);
  EXPECT_NEAR(hf.norm(), hd.norm(), 1e-10 * hd.norm());
  const CMatrix back = truncate(forward_dft(hf), 32);
  EXPECT_LT((back - hd).cwiseAbs().maxCoeff(), 1e-10);
  const CMatrix full = random_matrix(128, 16, 2);
  EXPECT_NEAR(forward_dft(full).norm(), full.norm(), 1e-10 * full.norm());
}

TEST(Transform, ImpulseInsideRetainedRowsIsLossless) {
  CMatrix hd = CMatrix::Zero(1024, 32);
  hd(5, 9) = {2.0, -1.0};
  const CMatrix& fd = unitary_dft(1024);
  const CMatrix& fa = unitary_dft(32);
  const CMatrix hf = fd * hd * fa.adjoint();
  const CMatrix kept = truncate(forward_dft(hf), 32);
  EXPECT_NEAR(kept.squaredNorm(), hf.squaredNorm(), 1e-10);
  EXPECT_NEAR(std::abs(kept(5, 9) - cplx(2.0, -1.0)), 0.0, 1e-10);
}

TEST(Transform, GeneratedChannelsSurviveTruncation) {
  const CsiSequence d = generate(small(0.9), 10);
  for (std::size_t k = 0; k < d.samples; ++k) {
    auto m = d.matrix(k, 0);
    CMatrix hd(32, 32);
    std::copy(m.begin(), m.end(), hd.data());
    const CMatrix hf = to_spatial_frequency(hd, 1024);
    const CMatrix kept = truncate(forward_dft(hf), 32);
    EXPECT_GE(kept.squaredNorm() / hf.squaredNorm(), 0.999);
  }
}

TEST(Transform, RealComplexRoundTrip) {
  const CMatrix a = random_matrix(3 * 4, 5, 3);
  std::vector<cplx> v(a.data(), a.data() + a.size());
  const Tensor t = complex_to_real(v, 3, 4, 5);
  EXPECT_EQ(t.shape(), (Shape{3, 2, 4, 5}));
  const auto back = real_to_complex(t);
  ASSERT_EQ(back.size(), v.size());
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_LT(std::abs(back[i] - v[i]), 1e-12);
  EXPECT_THROW(complex_to_real(v, 2, 4, 5), ContractViolation);
}

TEST(Transform, PurelyRealInputHasEmptyImaginaryChannel) {
  std::vector<cplx> v(2 * 3 * 3);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = {static_cast<double>(i) - 4.0, 0.0};
  const Tensor t = complex_to_real(v, 2, 3, 3);
  for (std::size_t k = 0; k < 2; ++k)
    for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(t[(k * 2 + 1) * 9 + i], 0.0);
}

TEST(Transform, RangeNormalizerCountsInsteadOfClipping) {
  Tensor train({2, 2, 2, 2}, std::vector<double>{0.1, -0.5, 0.25, 0.5, 0, 0, 0, 0, 0.3, 0.2, -0.1, 0, 0, 0, 0, 0.4});
  const RangeNormalizer n = RangeNormalizer::fit(train);
  EXPECT_DOUBLE_EQ(n.scale, 0.5);
  ClipCounter clips;
  const Tensor tn = n.normalize(train, &clips);
  EXPECT_EQ(clips.clipped, 0u);
  for (double v : tn.data()) EXPECT_LE(std::abs(v), 1.0);

  Tensor held({1, 2, 2, 2}, 0.0);
  held[3] = 1.0;  // twice the training max
  held[4] = -0.2;
  ClipCounter c2;
  const Tensor hn = n.normalize(held, &c2);
  EXPECT_EQ(c2.clipped, 1u);
  EXPECT_EQ(c2.total, 8u);
  EXPECT_DOUBLE_EQ(hn[3], 2.0);
  const Tensor back = n.denormalize(hn);
  for (std::size_t i = 0; i < held.size(); ++i) EXPECT_DOUBLE_EQ(back[i], held[i]);

  EXPECT_THROW(RangeNormalizer::fit(Tensor({1, 2, 1, 1}, 0.0)), ContractViolation);
  RangeNormalizer bad{0.0};
  EXPECT_THROW(bad.normalize(held), ContractViolation);
}
