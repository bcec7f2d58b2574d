#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "support.hpp"

using namespace thermvis;

namespace {

GrayImage u8(int h, int w, std::vector<double> px) {
  return GrayImage::from_pixels(h, w, ValueRange::UInt8, std::move(px));
}

double mean_where(const Sample& s, bool inside) {
  double sum = 0;
  long n = 0;
  for (int y = 0; y < s.image.height(); ++y) {
    for (int x = 0; x < s.image.width(); ++x) {
      bool in = false;
      for (const auto& b : s.boxes) in = in || (x >= b.x && x < b.right() && y >= b.y && y < b.bottom());
      if (in == inside) sum += s.image.at(y, x), ++n;
    }
  }
  return sum / static_cast<double>(n);
}

}  // namespace

TEST(GrayImage, RangeValidation) {
  EXPECT_THROW(GrayImage(0, 3, ValueRange::UInt8), ShapeError);
  EXPECT_THROW(u8(1, 2, {0, 256}).validate(), ContractError);
  EXPECT_NO_THROW(u8(1, 2, {0, 255}).validate());
  GrayImage n(1, 1, ValueRange::Normalized, 1.5);
  EXPECT_THROW(n.validate(), ContractError);
}

TEST(BBox, Clipping) {
  const BBox b{-2, 1, 6, 4};
  const auto c = b.clipped(3, 3);
  ASSERT_TRUE(c.has_value());
  EXPECT_EQ(*c, (BBox{0, 1, 3, 2}));
  EXPECT_FALSE((BBox{5, 5, 2, 2}).clipped(4, 4).has_value());
  EXPECT_TRUE((BBox{0, 0, 4, 4}).valid_in(4, 4));
  EXPECT_FALSE((BBox{1, 0, 4, 4}).valid_in(4, 4));
}

TEST(HistogramEqualize, ConstantImagePassesThrough) {
  const auto img = u8(3, 3, std::vector<double>(9, 77.0));
  EXPECT_EQ(histogram_equalize(img), img);
}

TEST(HistogramEqualize, FourLevelsFollowCdfFormula) {
  const std::vector<double> px{0, 85, 170, 255};
  const auto out = histogram_equalize(u8(2, 2, px));
  // cdf = 1,2,3,4; cdf_min = 1; N = 4
  for (int i = 0; i < 4; ++i) {
    const double expect = std::round((i + 1 - 1) / (4.0 - 1.0) * 255.0);
    EXPECT_EQ(out.pixels()[static_cast<std::size_t>(i)], expect);
  }
}

TEST(HistogramEqualize, UniformHistogramIsFixedPoint) {
  std::vector<double> px(256);
  for (int i = 0; i < 256; ++i) px[static_cast<std::size_t>(i)] = i;
  const auto img = u8(16, 16, px);
  const auto out = histogram_equalize(img);
  for (std::size_t i = 0; i < px.size(); ++i) EXPECT_NEAR(out.pixels()[i], px[i], 1.0);
}

TEST(HistogramEqualize, MonotoneAndIdempotentUpToRounding) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> level(20, 120);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> px(24 * 24);
    for (auto& v : px) v = level(rng);
    const auto img = u8(24, 24, px);
    const auto once = histogram_equalize(img);
    const auto twice = histogram_equalize(once);
    for (std::size_t i = 0; i < px.size(); ++i) {
      EXPECT_LE(std::abs(twice.pixels()[i] - once.pixels()[i]), 1.0);
      for (std::size_t j = 0; j < px.size(); j += 37) {
        if (px[i] < px[j]) {
          EXPECT_LE(once.pixels()[i], once.pixels()[j]);
        }
      }
    }
  }
}

TEST(HistogramEqualize, RejectsNormalizedInput) {
  EXPECT_THROW(histogram_equalize(GrayImage(2, 2, ValueRange::Normalized)), ContractError);
}

TEST(Normalize, AffineEndpoints) {
  const auto n = normalize(u8(1, 3, {0, 255, 128}));
  EXPECT_DOUBLE_EQ(n.pixels()[0], -1.0);
  EXPECT_DOUBLE_EQ(n.pixels()[1], 1.0);
  EXPECT_NEAR(n.pixels()[2], 128 / 127.5 - 1, 1e-15);
  EXPECT_NEAR(n.pixels()[2], 0.00392, 1e-5);
  EXPECT_THROW(normalize(n), ContractError);
}

TEST(Normalize, DenormalizeRoundTrip) {
  std::vector<double> px(256);
  for (int i = 0; i < 256; ++i) px[static_cast<std::size_t>(i)] = i;
  EXPECT_EQ(denormalize(normalize(u8(1, 256, px))), u8(1, 256, px));
  // a normalized grid survives denormalize then normalize within 1/255
  GrayImage g(1, 101, ValueRange::Normalized);
  for (int i = 0; i <= 100; ++i) g.at(0, i) = -1.0 + i / 50.0;
  const auto back = normalize(denormalize(g));
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_LE(std::abs(back.pixels()[i] - g.pixels()[i]), 1.0 / 255);
}

TEST(CropWithObject, ExactFitIsIdentity) {
  Sample s{GrayImage(256, 256, ValueRange::UInt8, 9.0), {{100, 100, 56, 56}}, Domain::IR, "a"};
  std::mt19937_64 rng(1);
  const Sample c = crop_with_object(s, 256, rng);
  EXPECT_EQ(c.image, s.image);
  EXPECT_EQ(c.boxes, s.boxes);
}

TEST(CropWithObject, AlwaysIntersectsSingleBox) {
  GrayImage img(512, 512, ValueRange::UInt8);
  Sample s{img, {{10, 10, 40, 40}}, Domain::IR, "a"};
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 1000; ++trial) {
    const Sample c = crop_with_object(s, 256, rng);
    ASSERT_EQ(c.boxes.size(), 1u);
    EXPECT_EQ(c.image.height(), 256);
    EXPECT_GT(c.boxes[0].area(), 0);
    EXPECT_TRUE(c.boxes[0].valid_in(256, 256));
  }
}

TEST(CropWithObject, AlwaysKeepsABoxOverSeeds) {
  const auto scenes = support::synth_set(Domain::VI, 20, 5, SceneSpec{});
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    std::mt19937_64 rng(seed);
    const Sample& s = scenes[seed % scenes.size()];
    const Sample c = crop_with_object(s, 32, rng);
    ASSERT_FALSE(c.boxes.empty()) << "seed " << seed;
    for (const auto& b : c.boxes) EXPECT_TRUE(b.valid_in(32, 32));
  }
}

TEST(CropWithObject, DropsSliversBelowRetention) {
  Sample s{GrayImage(8, 16, ValueRange::UInt8), {{6, 0, 10, 8}, {0, 0, 2, 2}}, Domain::IR, "a"};
  // window [0,8): box 0 keeps 2/10 of its width -> 20% < 25%
  const Sample c = crop_window(s, 0, 0, 8);
  ASSERT_EQ(c.boxes.size(), 1u);
  EXPECT_EQ(c.boxes[0], (BBox{0, 0, 2, 2}));
  const Sample d = crop_window(s, 8, 0, 8);
  ASSERT_EQ(d.boxes.size(), 1u);
  EXPECT_EQ(d.boxes[0], (BBox{0, 0, 8, 8}));
}

TEST(CropWithObject, Errors) {
  std::mt19937_64 rng(0);
  Sample small{GrayImage(8, 8, ValueRange::UInt8), {{0, 0, 2, 2}}, Domain::IR, "s"};
  EXPECT_THROW(crop_with_object(small, 16, rng), ShapeError);
  Sample empty{GrayImage(32, 32, ValueRange::UInt8), {}, Domain::IR, "e"};
  EXPECT_THROW(crop_with_object(empty, 16, rng), DataError);
}

TEST(SynthScene, DeterministicUnderSeed) {
  for (Domain d : {Domain::IR, Domain::VI}) {
    std::mt19937_64 a(11), b(11);
    const Sample s1 = synth_scene(a, d, SceneSpec{});
    const Sample s2 = synth_scene(b, d, SceneSpec{});
    EXPECT_EQ(s1.image, s2.image);
    EXPECT_EQ(s1.boxes, s2.boxes);
  }
}

TEST(SynthScene, IrObjectsBrighterThanBackground) {
  for (const auto& s : support::synth_set(Domain::IR, 50, 2)) {
    EXPECT_GT(mean_where(s, true), mean_where(s, false)) << s.id;
  }
}

TEST(SynthScene, ViObjectsDarkerThanBackground) {
  for (const auto& s : support::synth_set(Domain::VI, 50, 2)) {
    EXPECT_LT(mean_where(s, true), mean_where(s, false)) << s.id;
  }
}

TEST(SynthScene, BoxesValidOverThousandSamples) {
  SceneSpec spec;
  std::mt19937_64 rng(9);
  for (int i = 0; i < 1000; ++i) {
    const Sample s = synth_scene(rng, i % 2 ? Domain::IR : Domain::VI, spec);
    ASSERT_GE(s.boxes.size(), 1u);
    for (const auto& b : s.boxes) {
      ASSERT_TRUE(b.valid_in(spec.width, spec.height));
      ASSERT_GE(b.w, spec.min_object_size);
      ASSERT_LE(b.w, spec.max_object_size);
    }
    ASSERT_NO_THROW(s.image.validate());
  }
}

TEST(SynthScene, DegenerateSpecRejected) {
  SceneSpec spec;
  spec.min_objects = 0;
  EXPECT_THROW(spec.validate(true), ConfigError);
  EXPECT_NO_THROW(spec.validate(false));
  spec.max_object_size = 100;
  EXPECT_THROW(spec.validate(false), ConfigError);
}

TEST(Manifest, RoundTrip) {
  const auto dir = support::temp_dir("manifest");
  DatasetManifest m;
  m.root = dir;
  for (int i = 0; i < 3; ++i) {
    ManifestEntry e{"id" + std::to_string(i), "img" + std::to_string(i) + ".png",
                    i % 2 ? Domain::VI : Domain::IR, {{i, 1, 2, 3}, {0, 0, 1, 1}}};
    write_png(dir / e.file, GrayImage(8, 8, ValueRange::UInt8, 10.0 * i));
    m.entries.push_back(e);
  }
  write_manifest(dir / "m.jsonl", m);
  const auto back = read_manifest(dir / "m.jsonl");
  EXPECT_EQ(back, m);
  const Sample s = load_sample(back, back.entries[2]);
  EXPECT_EQ(s.image.at(3, 3), 20.0);
  EXPECT_EQ(s.domain, Domain::IR);
}

TEST(Manifest, RejectsDuplicatesMissingFilesAndGarbage) {
  const auto dir = support::temp_dir("manifest_bad");
  write_png(dir / "a.png", GrayImage(4, 4, ValueRange::UInt8));
  {
    std::ofstream out(dir / "dup.jsonl");
    out << R"({"id":"a","file":"a.png","domain":"IR","boxes":[]})" << '\n'
        << R"({"id":"a","file":"a.png","domain":"IR","boxes":[]})" << '\n';
  }
  EXPECT_THROW(read_manifest(dir / "dup.jsonl"), DataError);
  {
    std::ofstream out(dir / "missing.jsonl");
    out << R"({"id":"b","file":"nope.png","domain":"VI","boxes":[[0,0,1,1]]})" << '\n';
  }
  EXPECT_THROW(read_manifest(dir / "missing.jsonl"), DataError);
  EXPECT_NO_THROW(read_manifest(dir / "missing.jsonl", false));
  {
    std::ofstream out(dir / "garbage.jsonl");
    out << "{not json\n";
  }
  EXPECT_THROW(read_manifest(dir / "garbage.jsonl"), DataError);
  {
    std::ofstream out(dir / "badbox.jsonl");
    out << R"({"id":"c","file":"a.png","domain":"IR","boxes":[[0,0,0,1]]})" << '\n';
  }
  EXPECT_THROW(read_manifest(dir / "badbox.jsonl"), DataError);
}

TEST(Png, RoundTripPreservesPixels) {
  const auto dir = support::temp_dir("png");
  std::vector<double> px(12 * 7);
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<double>((i * 37) % 256);
  const auto img = u8(12, 7, px);
  write_png(dir / "x.png", img);
  EXPECT_EQ(read_png(dir / "x.png"), img);
  EXPECT_THROW(read_png(dir / "none.png"), DataError);
}
