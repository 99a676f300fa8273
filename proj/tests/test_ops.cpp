#include <gtest/gtest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "mnet/adam.hpp"
#include "mnet/error.hpp"
#include "mnet/ops.hpp"

using namespace mnet;
using mnet::testing::gradcheck;
using mnet::testing::random_tensor;

TEST(Conv2d, OnesKernelCountsOverlap) {
  Tape tape(false);
  Tensor x({1, 1, 3, 3}, 1.0);
  Tensor k({1, 1, 3, 3}, 1.0);
  Tensor b({1}, 0.0);
  const Tensor& y = conv2d(tape, x, k, &b, Padding::kSame);
  EXPECT_DOUBLE_EQ(y[4], 9.0);
  for (std::size_t i : {0u, 2u, 6u, 8u}) EXPECT_DOUBLE_EQ(y[i], 4.0);
  EXPECT_DOUBLE_EQ(y[1], 6.0);
}

TEST(Conv2d, CentreImpulseIsIdentity) {
  Tape tape(false);
  Tensor x = random_tensor({2, 1, 5, 32}, 3);
  Tensor k({1, 1, 7, 7}, 0.0);
  k[3 * 7 + 3] = 1.0;
  const Tensor& y = conv2d(tape, x, k, nullptr);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_DOUBLE_EQ(y[i], x[i]);
}

TEST(Conv2d, ValidPaddingShrinks) {
  Tape tape(false);
  Tensor x({1, 2, 6, 5}, 1.0);
  Tensor k({3, 2, 3, 3}, 1.0);
  const Tensor& y = conv2d(tape, x, k, nullptr, Padding::kValid);
  EXPECT_EQ(y.shape(), (Shape{1, 3, 4, 3}));
  EXPECT_DOUBLE_EQ(y[0], 18.0);
}

TEST(Conv2d, ChannelMismatchThrows) {
  Tape tape;
  Tensor x({1, 2, 4, 4});
  Tensor k({1, 3, 3, 3});
  EXPECT_THROW(conv2d(tape, x, k, nullptr), ContractViolation);
  Tensor even({1, 2, 2, 2});
  EXPECT_THROW(conv2d(tape, x, even, nullptr), ContractViolation);
}

TEST(Conv2d, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    Tensor x = random_tensor({2, 2, 8, 8}, 10 + seed);
    Tensor k = random_tensor({3, 2, 3, 3}, 20 + seed);
    Tensor b = random_tensor({3}, 30 + seed);
    for (Tensor* t : {&x, &k, &b}) t->set_requires_grad(true);
    const double err = gradcheck(
        [&](Tape& tape) -> Tensor& {
          Tensor& y = conv2d(tape, x, k, &b);
          Tensor& w = tape.keep(Tensor(y.shape(), 1.0));
          return weighted_sum(tape, y, w);
        },
        {&x, &k, &b});
    EXPECT_LT(err, 1e-4) << "seed " << seed;
  }
}

TEST(Conv2d, WideRowsAndValidPaddingGradients) {
  // Row width 32 takes the specialised path.
  Tensor x = random_tensor({2, 3, 4, 32}, 1);
  Tensor k = random_tensor({5, 3, 1, 7}, 2);
  Tensor w = random_tensor({2, 5, 4, 32}, 3);
  x.set_requires_grad(true);
  k.set_requires_grad(true);
  EXPECT_LT(gradcheck([&](Tape& t) -> Tensor& { return weighted_sum(t, conv2d(t, x, k, nullptr), w); }, {&x, &k}),
            1e-4);
  Tensor xv = random_tensor({1, 2, 6, 7}, 4);
  Tensor kv = random_tensor({2, 2, 3, 5}, 5);
  Tensor wv = random_tensor({1, 2, 4, 3}, 6);
  xv.set_requires_grad(true);
  kv.set_requires_grad(true);
  EXPECT_LT(gradcheck([&](Tape& t) -> Tensor& { return weighted_sum(t, conv2d(t, xv, kv, nullptr, Padding::kValid), wv); },
                      {&xv, &kv}),
            1e-4);
}

TEST(Affine, IdentityAndBias) {
  Tape tape(false);
  Tensor x = random_tensor({3, 4}, 1);
  Tensor eye({4, 4}, 0.0);
  for (std::size_t i = 0; i < 4; ++i) eye[i * 4 + i] = 1.0;
  Tensor zero({4}, 0.0);
  const Tensor& y = affine(tape, x, eye, &zero);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_DOUBLE_EQ(y[i], x[i]);

  Tensor w0({2, 4}, 0.0);
  Tensor b({2}, std::vector<double>{1.5, -2.0});
  const Tensor& z = affine(tape, x, w0, &b);
  for (std::size_t r = 0; r < 3; ++r) {
    EXPECT_DOUBLE_EQ(z[r * 2], 1.5);
    EXPECT_DOUBLE_EQ(z[r * 2 + 1], -2.0);
  }
}

TEST(Affine, MismatchThrowsAndGradientsMatch) {
  Tape tape;
  Tensor x = random_tensor({4, 6}, 1);
  Tensor bad({5, 7});
  EXPECT_THROW(affine(tape, x, bad, nullptr), ContractViolation);

  Tensor w = random_tensor({5, 6}, 2);
  Tensor b = random_tensor({5}, 3);
  Tensor ws = random_tensor({4, 5}, 4);
  for (Tensor* t : {&x, &w, &b}) t->set_requires_grad(true);
  EXPECT_LT(gradcheck([&](Tape& t) -> Tensor& { return weighted_sum(t, affine(t, x, w, &b), ws); }, {&x, &w, &b}),
            1e-4);
}

TEST(BatchNorm, TrainModeStandardises) {
  Tape tape(false);
  Tensor x = random_tensor({6, 3, 4, 5}, 9, -3, 5);
  Tensor g({3}, 1.0), b({3}, 0.0), rm({3}, 0.0), rv({3}, 1.0);
  const Tensor& y = batch_norm(tape, x, g, b, rm, rv, Mode::kTrain);
  for (std::size_t c = 0; c < 3; ++c) {
    double s = 0, s2 = 0;
    std::size_t n = 0;
    for (std::size_t k = 0; k < 6; ++k)
      for (std::size_t i = 0; i < 20; ++i) {
        const double v = y[(k * 3 + c) * 20 + i];
        s += v;
        s2 += v * v;
        ++n;
      }
    const double mean = s / n;
    EXPECT_NEAR(mean, 0.0, 1e-6);
    // eps = 1e-5 keeps the variance just under one
    EXPECT_NEAR(s2 / n - mean * mean, 1.0, 1e-3);
  }
  // running stats moved toward the batch statistics
  EXPECT_NE(rm[0], 0.0);
}

TEST(BatchNorm, EvalWithUnitStatsIsIdentity) {
  Tape tape(false);
  Tensor x = random_tensor({2, 2, 3, 3}, 4);
  Tensor g({2}, 1.0), b({2}, 0.0), rm({2}, 0.0), rv({2}, 1.0);
  const Tensor& y = batch_norm(tape, x, g, b, rm, rv, Mode::kEval);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y[i], x[i], 1e-5 * std::abs(x[i]) + 1e-12);
}

TEST(BatchNorm, SingleSampleTrainThrows) {
  Tape tape;
  Tensor x({1, 2, 3, 3});
  Tensor g({2}, 1.0), b({2}, 0.0), rm({2}, 0.0), rv({2}, 1.0);
  EXPECT_THROW(batch_norm(tape, x, g, b, rm, rv, Mode::kTrain), ContractViolation);
}

TEST(BatchNorm, GradientMatchesFiniteDifferences) {
  Tensor x = random_tensor({4, 3, 3, 4}, 5);
  Tensor g = random_tensor({3}, 6, 0.5, 1.5);
  Tensor b = random_tensor({3}, 7);
  Tensor rm({3}, 0.0), rv({3}, 1.0);
  Tensor w = random_tensor({4, 3, 3, 4}, 8);
  for (Tensor* t : {&x, &g, &b}) t->set_requires_grad(true);
  const double err = gradcheck(
      [&](Tape& t) -> Tensor& { return weighted_sum(t, batch_norm(t, x, g, b, rm, rv, Mode::kTrain), w); },
      {&x, &g, &b});
  EXPECT_LT(err, 1e-3);
}

TEST(Activations, KnownValues) {
  Tape tape(false);
  Tensor x({3}, std::vector<double>{0.0, -1.0, 2.0});
  const Tensor& t = mnet::tanh(tape, x);
  EXPECT_DOUBLE_EQ(t[0], 0.0);
  const Tensor& l = leaky_relu(tape, x, 0.3);
  EXPECT_DOUBLE_EQ(l[1], -0.3);
  EXPECT_DOUBLE_EQ(l[2], 2.0);
  Tensor big({2}, std::vector<double>{40.0, -40.0});
  const Tensor& tb = mnet::tanh(tape, big);
  // Saturates to +-1 in double precision but never beyond.
  EXPECT_LE(std::abs(tb[0]), 1.0);
  Tensor r = random_tensor({100}, 2, -5, 5);
  for (double v : mnet::tanh(tape, r).data()) EXPECT_LT(std::abs(v), 1.0);
}

TEST(Activations, GradientsMatch) {
  Tensor x = random_tensor({3, 7}, 11);
  Tensor w = random_tensor({3, 7}, 12);
  x.set_requires_grad(true);
  EXPECT_LT(gradcheck([&](Tape& t) -> Tensor& { return weighted_sum(t, mnet::tanh(t, x), w); }, {&x}), 1e-6);
  EXPECT_LT(gradcheck([&](Tape& t) -> Tensor& { return weighted_sum(t, leaky_relu(t, x, 0.3), w); }, {&x}), 1e-6);
}

TEST(MseLoss, ValuesAndShapeCheck) {
  Tape tape(false);
  Tensor a = random_tensor({4, 2, 3}, 1);
  EXPECT_DOUBLE_EQ(mse_loss(tape, a, a).item(), 0.0);
  Tensor shifted = a;
  for (double& v : shifted.data()) v += 0.5;
  // c^2 * E with E = 6 elements per sample
  EXPECT_NEAR(mse_loss(tape, shifted, a).item(), 0.25 * 6, 1e-12);
  Tensor other({4, 6});
  EXPECT_THROW(mse_loss(tape, a, other), ContractViolation);
}

TEST(MseLoss, GradientMatches) {
  Tensor p = random_tensor({3, 5}, 3);
  const Tensor q = random_tensor({3, 5}, 4);
  p.set_requires_grad(true);
  EXPECT_LT(gradcheck([&](Tape& t) -> Tensor& { return mse_loss(t, p, q); }, {&p}), 1e-6);
}

TEST(Composite, ChainMatchesEndToEndDifferences) {
  // conv -> leaky -> reshape -> affine -> tanh -> add -> mse
  Tensor x = random_tensor({2, 2, 4, 4}, 1);
  Tensor k = random_tensor({3, 2, 3, 3}, 2);
  Tensor w = random_tensor({5, 48}, 3);
  Tensor b = random_tensor({5}, 4);
  Tensor skip = random_tensor({2, 5}, 5);
  const Tensor target = random_tensor({2, 5}, 6);
  for (Tensor* t : {&x, &k, &w, &b, &skip}) t->set_requires_grad(true);
  const double err = gradcheck(
      [&](Tape& t) -> Tensor& {
        Tensor& h = leaky_relu(t, conv2d(t, x, k, nullptr), 0.3);
        Tensor& f = reshape(t, h, {2, 48});
        Tensor& z = mnet::tanh(t, affine(t, f, w, &b));
        return mse_loss(t, add(t, z, skip), target);
      },
      {&x, &k, &w, &b, &skip});
  EXPECT_LT(err, 1e-4);
}

TEST(Ops, ForwardIsBitIdentical) {
  Tensor x = random_tensor({2, 2, 6, 32}, 8);
  Tensor k = random_tensor({4, 2, 7, 7}, 9);
  Tape t1(false), t2(false);
  const Tensor& a = conv2d(t1, x, k, nullptr);
  const Tensor& b = conv2d(t2, x, k, nullptr);
  for (std::size_t i = 0; i < a.size(); ++i) ASSERT_EQ(a[i], b[i]);
}

TEST(Ops, InferenceTapeProducesNoGradients) {
  Tensor x = random_tensor({2, 3}, 1);
  x.set_requires_grad(true);
  Tape tape(false);
  const Tensor& y = mnet::tanh(tape, x);
  EXPECT_FALSE(y.requires_grad());
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Tensor p = random_tensor({4}, 1);
  const Tensor before = p;
  p.ensure_grad();
  Adam opt({&p});
  opt.step();
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_DOUBLE_EQ(p[i], before[i]);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  // Bias correction makes the first step exactly lr * g / (|g| + eps').
  Tensor p({1}, 0.0);
  p.ensure_grad()[0] = 1.0;
  AdamState s;
  adam_step({&p}, s);
  const double expected = -1e-3 * 1.0 / (1.0 + 1e-8);
  EXPECT_NEAR(p[0], expected, 1e-9);
  EXPECT_EQ(s.step_count, 1u);
  EXPECT_EQ(s.first_moment[0].size(), 1u);
}

TEST(Adam, MissingGradientThrows) {
  Tensor p({2}, 1.0);
  AdamState s;
  EXPECT_THROW(adam_step({&p}, s), ContractViolation);
}

TEST(Adam, ConvergesOnQuadraticBowl) {
  Tensor w({1}, 1.0);
  w.set_requires_grad(true);
  AdamOptions o;
  o.learning_rate = 1e-2;
  Adam opt({&w}, o);
  for (int i = 0; i < 500; ++i) {
    opt.zero_grad();
    Tape tape;
    tape.backward(mse_loss(tape, w, Tensor({1}, 0.0)));
    opt.step();
  }
  EXPECT_LT(std::abs(w[0]), 1e-3);
}
