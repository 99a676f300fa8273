#include <gtest/gtest.h>

#include "mnet/error.hpp"
#include "mnet/tape.hpp"
#include "mnet/tensor.hpp"

using namespace mnet;

TEST(Tensor, ShapeMatchesData) {
  Tensor t({2, 3, 4}, 1.5);
  EXPECT_EQ(t.size(), 24u);
  EXPECT_EQ(t.rank(), 3u);
  EXPECT_EQ(shape_numel(t.shape()), t.size());
  EXPECT_DOUBLE_EQ(t[23], 1.5);
}

TEST(Tensor, RejectsZeroExtentAndLengthMismatch) {
  EXPECT_THROW(Tensor({2, 0}), ContractViolation);
  EXPECT_THROW(Tensor(Shape{}), ContractViolation);
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), ContractViolation);
}

TEST(Tensor, GradientHasDataLength) {
  Tensor t({3, 2});
  EXPECT_FALSE(t.has_grad());
  auto g = t.ensure_grad();
  EXPECT_EQ(g.size(), t.size());
  g[4] = 2.0;
  t.zero_grad();
  EXPECT_DOUBLE_EQ(t.grad()[4], 0.0);
}

TEST(Tensor, ReshapeSliceGather) {
  Tensor t({3, 2}, std::vector<double>{0, 1, 2, 3, 4, 5});
  EXPECT_THROW(t.reshaped({4}), ContractViolation);
  const Tensor r = t.reshaped({6});
  EXPECT_EQ(r.shape(), Shape{6});
  const Tensor s = t.slice_rows(1, 3);
  EXPECT_EQ(s.shape(), (Shape{2, 2}));
  EXPECT_DOUBLE_EQ(s[0], 2.0);
  const std::vector<std::size_t> rows{2, 0};
  const Tensor g = gather_rows(t, rows);
  EXPECT_DOUBLE_EQ(g[0], 4.0);
  EXPECT_DOUBLE_EQ(g[3], 1.0);
  EXPECT_THROW(t.slice_rows(2, 2), ContractViolation);
}

TEST(Tensor, UniformIsSeeded) {
  std::mt19937_64 a(7), b(7);
  const Tensor x = Tensor::uniform({5, 5}, -1, 1, a);
  const Tensor y = Tensor::uniform({5, 5}, -1, 1, b);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(x[i], y[i]);
  for (double v : x.data()) EXPECT_TRUE(v >= -1 && v < 1);
}

TEST(Tensor, FiniteCheck) {
  Tensor t({2}, 0.0);
  EXPECT_TRUE(t.all_finite());
  t[1] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_FALSE(t.all_finite());
}

TEST(Tape, RunsRulesOnceNewestFirst) {
  Tape tape;
  std::vector<int> order;
  tape.record([&] { order.push_back(1); });
  tape.record([&] { order.push_back(2); });
  Tensor root = Tensor::scalar(1.0);
  root.set_requires_grad(true);
  tape.backward(root);
  EXPECT_EQ(order, (std::vector<int>{2, 1}));
  EXPECT_DOUBLE_EQ(root.grad()[0], 1.0);
  EXPECT_THROW(tape.backward(root), ContractViolation);
}

TEST(Tape, NonRecordingTapeIgnoresRules) {
  Tape tape(false);
  tape.record([] {});
  EXPECT_EQ(tape.op_count(), 0u);
  Tensor root = Tensor::scalar(1.0);
  root.set_requires_grad(true);
  EXPECT_THROW(tape.backward(root), ContractViolation);
}

TEST(Tape, RootMustBeScalar) {
  Tape tape;
  Tensor root({2}, 1.0);
  root.set_requires_grad(true);
  EXPECT_THROW(tape.backward(root), ContractViolation);
}
