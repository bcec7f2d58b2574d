#include <gtest/gtest.h>

#include "support.hpp"

using namespace thermvis;
using thermvis::support::FdStats;

namespace {

constexpr double kStep = 1e-6;
constexpr double kRtol = 1e-4;

/// Checks parameter and input gradients of L(x) = sum(r * layer(x)).
FdStats check_layer(Layer<double>& layer, Tensor<double> x, Mode mode, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  LayerCache<double> cache;
  const Tensor<double> y = layer.forward(x, mode, &cache);
  const Tensor<double> r = support::random_tensor<double>(y.shape(), rng);
  StateView<double> view;
  layer.collect("layer", view);
  zero_grads(view);
  const Tensor<double> dx = layer.backward(r, cache, true);

  auto loss = [&] {
    const Tensor<double> out = layer.forward(x, mode, nullptr);
    double s = 0;
    for (std::size_t i = 0; i < out.size(); ++i) s += r[i] * out[i];
    return s;
  };
  FdStats st = support::check_params(support::params_of(view, "layer"), loss, 0, kStep, kRtol);
  st.merge(support::check_array("input", x, dx, loss, 0, kStep, kRtol, rng));
  return st;
}

Tensor<double> input(Shape s, std::uint64_t seed = 5) {
  std::mt19937_64 rng(seed);
  return support::random_tensor<double>(s, rng);
}

void init(Layer<double>& l, std::uint64_t seed = 3, double std = 0.5) {
  std::mt19937_64 rng(seed);
  l.initialize(rng, std);
}

}  // namespace

TEST(Conv2d, OutputExtent) {
  Conv2d<float> c(1, 2, 3, 2, 1, PadMode::Reflect, false);
  EXPECT_EQ(c.infer(Tensor<float>(1, 1, 8, 8)).shape(), (Shape{1, 2, 4, 4}));
  Conv2d<float> d(1, 1, 4, 2, 1, PadMode::Zero, true);
  EXPECT_EQ(d.infer(Tensor<float>(1, 1, 9, 9)).shape(), (Shape{1, 1, 4, 4}));
  EXPECT_THROW(c.infer(Tensor<float>(1, 3, 8, 8)), ShapeError);
}

TEST(Conv2d, MatchesDirectConvolutionWithReflection) {
  Conv2d<double> c(2, 3, 3, 1, 1, PadMode::Reflect, true);
  init(c);
  for (auto& v : c.bias().value.values()) v = 0.25;
  const auto x = input({1, 2, 5, 4});
  const auto y = c.infer(x);
  auto reflect = [](int i, int n) { return i < 0 ? -i : (i >= n ? 2 * n - 2 - i : i); };
  for (int o = 0; o < 3; ++o) {
    for (int oy = 0; oy < 5; ++oy) {
      for (int ox = 0; ox < 4; ++ox) {
        double s = 0.25;
        for (int ci = 0; ci < 2; ++ci) {
          for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
              s += c.weight().value.at(o, ci, ky, kx) *
                   x.at(0, ci, reflect(oy + ky - 1, 5), reflect(ox + kx - 1, 4));
            }
          }
        }
        EXPECT_NEAR(y.at(0, o, oy, ox), s, 1e-12);
      }
    }
  }
}

TEST(Conv2d, GradientsMatchFiniteDifferences) {
  for (PadMode pad : {PadMode::Zero, PadMode::Reflect}) {
    for (int stride : {1, 2}) {
      Conv2d<double> c(2, 3, 3, stride, 1, pad, true);
      init(c);
      const auto st = check_layer(c, input({2, 2, 6, 6}), Mode::Train);
      EXPECT_EQ(st.passed, st.checked) << "worst " << st.worst << " at " << st.worst_name;
    }
  }
  Conv2d<double> k7(1, 2, 7, 1, 3, PadMode::Reflect, true);
  init(k7);
  const auto st = check_layer(k7, input({1, 1, 8, 8}), Mode::Train);
  EXPECT_EQ(st.passed, st.checked) << st.worst_name;
}

TEST(ConvTranspose2d, DoublesExtent) {
  ConvTranspose2d<float> t(4, 2, false);
  EXPECT_EQ(t.infer(Tensor<float>(2, 4, 3, 5)).shape(), (Shape{2, 2, 6, 10}));
}

TEST(ConvTranspose2d, IsAdjointOfStridedConvolution) {
  // <convT(x), y> == <x, conv(y)> when both share the weight array
  ConvTranspose2d<double> t(2, 3, false);
  init(t);
  Conv2d<double> c(3, 2, 3, 2, 1, PadMode::Zero, false);
  for (int i = 0; i < 2; ++i)
    for (int o = 0; o < 3; ++o)
      for (int k = 0; k < 9; ++k) c.weight().value.at(i, o, k / 3, k % 3) = t.weight().value.at(i, o, k / 3, k % 3);
  const auto x = input({1, 2, 3, 3}, 1);
  const auto y = input({1, 3, 6, 6}, 2);
  const auto tx = t.infer(x);
  const auto cy = c.infer(y);
  double lhs = 0, rhs = 0;
  for (std::size_t i = 0; i < y.size(); ++i) lhs += tx[i] * y[i];
  for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * cy[i];
  EXPECT_NEAR(lhs, rhs, 1e-12);
}

TEST(ConvTranspose2d, GradientsMatchFiniteDifferences) {
  ConvTranspose2d<double> t(3, 2, true);
  init(t);
  const auto st = check_layer(t, input({2, 3, 3, 4}), Mode::Train);
  EXPECT_EQ(st.passed, st.checked) << st.worst_name;
}

TEST(Norm, BatchTrainStatistics) {
  Norm<double> n(NormKind::Batch, 2);
  const auto x = input({3, 2, 4, 4});
  const auto y = n.forward(x, Mode::Train, nullptr);
  for (int c = 0; c < 2; ++c) {
    double s = 0, s2 = 0;
    for (int b = 0; b < 3; ++b)
      for (int i = 0; i < 16; ++i) s += y.plane(b, c)[i], s2 += y.plane(b, c)[i] * y.plane(b, c)[i];
    EXPECT_NEAR(s / 48, 0.0, 1e-12);
    EXPECT_NEAR(s2 / 48, 1.0, 1e-3);
  }
  // running stats moved 10% toward the batch statistics
  double mean0 = 0;
  for (int b = 0; b < 3; ++b)
    for (int i = 0; i < 16; ++i) mean0 += x.plane(b, 0)[i];
  EXPECT_NEAR(n.running_mean()[0], 0.1 * mean0 / 48, 1e-12);
}

TEST(Norm, EvalUsesRunningStatistics) {
  Norm<double> n(NormKind::Batch, 1);
  n.running_mean()[0] = 0.5;
  n.running_var()[0] = 4.0;
  Tensor<double> x(1, 1, 1, 2);
  x[0] = 2.5, x[1] = 0.5;
  const auto y = n.infer(x);
  EXPECT_NEAR(y[0], 2.0 / std::sqrt(4.0 + 1e-5), 1e-12);
  EXPECT_NEAR(y[1], 0.0, 1e-12);
}

TEST(Norm, GradientsMatchFiniteDifferences) {
  for (NormKind k : {NormKind::Batch, NormKind::Instance}) {
    for (Mode m : {Mode::Train, Mode::Eval}) {
      Norm<double> n(k, 3);
      std::mt19937_64 rng(4);
      for (auto& v : n.scale().value.values()) v = 0.5 + std::uniform_real_distribution<double>(0, 1)(rng);
      for (auto& v : n.shift().value.values()) v = std::uniform_real_distribution<double>(-1, 1)(rng);
      n.running_mean()[1] = 0.3;
      n.running_var()[2] = 2.0;
      const auto st = check_layer(n, input({2, 3, 3, 3}), m);
      EXPECT_EQ(st.passed, st.checked) << to_string(k) << " worst " << st.worst << " " << st.worst_name;
    }
  }
}

TEST(LeakyRelu, NegativeSlope) {
  LeakyRelu<double> l(0.2);
  Tensor<double> x(1, 1, 1, 3);
  x[0] = -1.0, x[1] = 2.0, x[2] = -0.5;
  const auto y = l.infer(x);
  EXPECT_DOUBLE_EQ(y[0], -0.2);
  EXPECT_DOUBLE_EQ(y[1], 2.0);
  EXPECT_DOUBLE_EQ(y[2], -0.1);
}

TEST(Residual, SkipPlusBodyAndGradients) {
  Sequential<double> body;
  body.add<Conv2d<double>>("conv1", 2, 2, 3, 1, 1, PadMode::Reflect, false);
  body.add<Norm<double>>("norm1", NormKind::Instance, 2);
  body.add<LeakyRelu<double>>("relu", 0.0);
  body.add<Conv2d<double>>("conv2", 2, 2, 3, 1, 1, PadMode::Reflect, false);
  body.add<Norm<double>>("norm2", NormKind::Instance, 2);
  Residual<double> r(std::move(body));
  init(r);
  const auto x = input({1, 2, 4, 4});
  const auto y = r.infer(x);
  const auto b = r.body().infer(x);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_DOUBLE_EQ(y[i], x[i] + b[i]);
  StateView<double> view;
  r.collect("res1", view);
  ASSERT_EQ(view.params.size(), 6u);
  EXPECT_EQ(view.params[0].first, "res1.conv1.weight");
  const auto st = check_layer(r, x, Mode::Train);
  EXPECT_GE(st.pass_rate(), 0.99) << st.worst_name;
}
