#include <gtest/gtest.h>

#include "support.hpp"

using namespace thermvis;

namespace {

GeneratorConfig toy(int filters = 8, int blocks = 2, NormKind norm = NormKind::Batch) {
  GeneratorConfig c;
  c.base_filters = filters;
  c.n_res_blocks = blocks;
  c.norm = norm;
  return c;
}

Param<double>* find(StateView<double>& v, const std::string& name) {
  for (auto& [n, p] : v.params) {
    if (n == name) return p;
  }
  return nullptr;
}

GrayImage random_image(int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  GrayImage g(h, w, ValueRange::Normalized);
  for (auto& v : g.pixels()) v = u(rng);
  return g;
}

}  // namespace

TEST(Generator, SameSeedSameParameters) {
  std::mt19937_64 a(5), b(5);
  auto g1 = build_generator<float>(toy(), a);
  auto g2 = build_generator<float>(toy(), b);
  const auto v1 = g1.state(), v2 = g2.state();
  ASSERT_EQ(v1.params.size(), v2.params.size());
  for (std::size_t i = 0; i < v1.params.size(); ++i) {
    EXPECT_EQ(v1.params[i].first, v2.params[i].first);
    EXPECT_EQ(v1.params[i].second->value, v2.params[i].second->value);
  }
}

TEST(Generator, InitializationStatistics) {
  std::mt19937_64 rng(1);
  auto g = build_generator<double>(GeneratorConfig{}, rng);
  auto v = g.state();
  const auto& w = find(v, "main.stem.conv.weight")->value;
  ASSERT_EQ(w.size(), 32u * 49u);
  double mean = 0, var = 0;
  for (double x : w.values()) mean += x;
  mean /= static_cast<double>(w.size());
  for (double x : w.values()) var += (x - mean) * (x - mean);
  var /= static_cast<double>(w.size() - 1);
  EXPECT_GE(var, 0.0003);
  EXPECT_LE(var, 0.0005);
  for (auto& [name, p] : v.params) {
    if (name.find(".norm") != std::string::npos && name.ends_with(".weight")) {
      for (double x : p->value.values()) EXPECT_EQ(x, 1.0) << name;
    }
    if (name.ends_with(".bias")) {
      for (double x : p->value.values()) EXPECT_EQ(x, 0.0) << name;
    }
  }
}

TEST(Generator, DefaultConfigConvolutionInventory) {
  Generator<float> g(GeneratorConfig{});
  const auto v = g.state();
  std::vector<std::string> convs;
  for (const auto& [name, p] : v.params) {
    if (name.ends_with(".weight") && name.find("norm") == std::string::npos) convs.push_back(name);
  }
  auto count = [&](const std::string& needle) {
    return std::count_if(convs.begin(), convs.end(),
                         [&](const std::string& n) { return n.find(needle) != std::string::npos; });
  };
  EXPECT_EQ(convs.size(), 25u);
  EXPECT_EQ(count("main.stem."), 1);
  EXPECT_EQ(count("main.down"), 2);
  EXPECT_EQ(count("main.res"), 18);
  EXPECT_EQ(count("main.up"), 2);
  EXPECT_EQ(count("main.out."), 1);
  EXPECT_EQ(count("structure."), 1);
  // c7s1-32, d64, d128, R128, u64, u32, c7s1-1
  auto& view = const_cast<StateView<float>&>(v);
  auto shape_of = [&](const std::string& n) {
    for (auto& [name, p] : view.params) {
      if (name == n) return p->value.shape();
    }
    return Shape{};
  };
  EXPECT_EQ(shape_of("main.stem.conv.weight"), (Shape{32, 1, 7, 7}));
  EXPECT_EQ(shape_of("main.down1.conv.weight"), (Shape{64, 32, 3, 3}));
  EXPECT_EQ(shape_of("main.down2.conv.weight"), (Shape{128, 64, 3, 3}));
  EXPECT_EQ(shape_of("main.res9.conv2.weight"), (Shape{128, 128, 3, 3}));
  EXPECT_EQ(shape_of("main.up1.conv.weight"), (Shape{128, 64, 3, 3}));
  EXPECT_EQ(shape_of("main.up2.conv.weight"), (Shape{64, 32, 3, 3}));
  EXPECT_EQ(shape_of("main.out.conv.weight"), (Shape{1, 32, 7, 7}));
  EXPECT_EQ(shape_of("structure.weight"), (Shape{1, 1, 7, 7}));
}

TEST(Generator, DefaultConfigPreservesFullSize) {
  std::mt19937_64 rng(2);
  const auto g = build_generator<float>(GeneratorConfig{}, rng);
  const auto out = translate(g, random_image(256, 256, 3));
  EXPECT_EQ(out.height(), 256);
  EXPECT_EQ(out.width(), 256);
}

TEST(Generator, ToyConfigPreservesSizeAndRange) {
  std::mt19937_64 rng(2);
  auto g = build_generator<float>(toy(), rng);
  for (auto [h, w] : {std::pair{64, 64}, std::pair{32, 48}, std::pair{8, 12}}) {
    for (Mode m : {Mode::Eval, Mode::Train}) {
      const auto out = translate(g, random_image(h, w, 4), m);
      ASSERT_EQ(out.height(), h);
      ASSERT_EQ(out.width(), w);
      for (double v : out.pixels()) {
        EXPECT_GT(v, -1.0);
        EXPECT_LT(v, 1.0);
      }
    }
  }
}

TEST(Generator, RejectsIndivisibleShape) {
  Generator<float> g(toy());
  try {
    (void)g.infer(Tensor<float>(1, 1, 30, 32));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("multiples of 4"), std::string::npos);
  }
  EXPECT_THROW(translate(g, GrayImage(8, 8, ValueRange::UInt8)), ContractError);
}

TEST(Generator, DiracStructureWithSilencedMainIsTanh) {
  std::mt19937_64 rng(6);
  auto g = build_generator<double>(toy(4, 1), rng, 0.3);
  auto v = g.state();
  find(v, "main.out.conv.weight")->value.zero();
  find(v, "main.out.conv.bias")->value.zero();
  auto& s = find(v, "structure.weight")->value;
  s.zero();
  s.at(0, 0, 3, 3) = 1.0;
  find(v, "structure.bias")->value.zero();
  const auto x = random_image(16, 20, 7);
  for (Mode m : {Mode::Eval, Mode::Train}) {
    const auto y = translate(g, x, m);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y.pixels()[i], std::tanh(x.pixels()[i]), 1e-15);
  }
}

TEST(Generator, ShiftEquivariantAwayFromBorder) {
  std::mt19937_64 rng(8);
  auto g = build_generator<double>(toy(4, 0), rng, 0.3);
  const int n = 64;
  const auto x = random_image(n, n, 9);
  GrayImage shifted(n, n, ValueRange::Normalized);
  for (int y = 0; y < n; ++y)
    for (int c = 0; c < n; ++c) shifted.at(y, c) = x.at((y - 4 + n) % n, (c - 4 + n) % n);
  const auto a = translate(g, x);
  const auto b = translate(g, shifted);
  for (int y = 16; y < n - 16 - 4; ++y)
    for (int c = 16; c < n - 16 - 4; ++c) EXPECT_NEAR(b.at(y + 4, c + 4), a.at(y, c), 1e-5);
}

TEST(Generator, GradientsMatchFiniteDifferences) {
  for (NormKind norm : {NormKind::Batch, NormKind::Instance}) {
    std::mt19937_64 rng(10);
    auto g = build_generator<double>(toy(4, 1, norm), rng, 0.3);
    Tensor<double> x = support::random_tensor<double>({2, 1, 8, 8}, rng);
    const Tensor<double> r = support::random_tensor<double>({2, 1, 8, 8}, rng);
    Generator<double>::Trace trace;
    g.forward(x, Mode::Train, &trace);
    support::clear_grads(g.state());
    const auto dx = g.backward(r, trace);
    auto loss = [&] {
      const auto y = g.forward(x, Mode::Train);
      double s = 0;
      for (std::size_t i = 0; i < y.size(); ++i) s += r[i] * y[i];
      return s;
    };
    auto st = support::check_params(support::params_of(g.state(), "G"), loss, 0, 1e-6, 1e-4);
    std::mt19937_64 pick(1);
    st.merge(support::check_array("input", x, dx, loss, 0, 1e-6, 1e-4, pick));
    EXPECT_GE(st.pass_rate(), 0.99) << to_string(norm) << " worst " << st.worst << " at " << st.worst_name
                                    << " (" << st.passed << "/" << st.checked << ")";
  }
}
