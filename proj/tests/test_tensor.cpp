#include <gtest/gtest.h>

#include "thermvis/tensor.hpp"

using thermvis::Shape;
using thermvis::Tensor;

TEST(Tensor, ShapeArithmetic) {
  const Shape s{2, 3, 4, 5};
  EXPECT_EQ(s.numel(), 120u);
  EXPECT_EQ(s.plane(), 20u);
  EXPECT_EQ(s.str(), "[2,3,4,5]");
}

TEST(Tensor, AtUsesNchwLayout) {
  Tensor<float> t(2, 3, 4, 5);
  t.at(1, 2, 3, 4) = 7.0f;
  EXPECT_EQ(t[t.size() - 1], 7.0f);
  t.at(0, 1, 0, 0) = 3.0f;
  EXPECT_EQ(t[20], 3.0f);
  EXPECT_EQ(t.plane(0, 1)[0], 3.0f);
}

TEST(Tensor, ArithmeticRequiresSameShape) {
  Tensor<double> a(1, 1, 2, 2, 1.0), b(1, 1, 2, 2, 2.0), c(1, 1, 2, 3);
  a += b;
  EXPECT_EQ(a[3], 3.0);
  a *= 2.0;
  EXPECT_EQ(a[0], 6.0);
  EXPECT_THROW(a += c, thermvis::ShapeError);
}

TEST(Tensor, SliceAndConcatRoundTrip) {
  Tensor<double> t(3, 1, 2, 2);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i);
  std::vector<Tensor<double>> parts{t.slice(0, 1), t.slice(1, 2)};
  EXPECT_EQ(parts[1].n(), 2);
  EXPECT_EQ(parts[1][0], 4.0);
  EXPECT_EQ(thermvis::concat_batch<double>(parts), t);
  EXPECT_THROW(t.slice(2, 2), thermvis::ShapeError);
}

TEST(Tensor, CastPreservesValues) {
  Tensor<double> t(1, 1, 1, 3);
  t[0] = 0.5, t[1] = -1.25, t[2] = 3.0;
  const auto f = t.cast<float>();
  EXPECT_EQ(f[1], -1.25f);
  EXPECT_EQ(f.shape(), t.shape());
}

TEST(Tensor, NegativeExtentRejected) {
  EXPECT_THROW((void)Tensor<float>(Shape{1, -1, 2, 2}), thermvis::ShapeError);
  EXPECT_THROW((void)Tensor<float>(1, 1, -2, 2), thermvis::ShapeError);
}
