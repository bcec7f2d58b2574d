#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "thermvis/error.hpp"
#include "thermvis/image.hpp"

namespace thermvis {

/// Parameters of the synthetic IR/VI scene generator.
struct SceneSpec {
  int width = 64;
  int height = 64;
  int min_objects = 1;
  int max_objects = 3;
  int min_object_size = 8;
  int max_object_size = 16;

  double ir_background = 40.0;
  double ir_noise = 10.0;
  double ir_object_level = 225.0;

  double vi_background = 140.0;
  double vi_texture = 10.0;
  double vi_object_level = 55.0;
  double vi_object_texture = 18.0;

  /// Throws ConfigError for unusable specs. Training crops need at least
  /// one object per scene, so `objects_required` forbids min_objects == 0.
  void validate(bool objects_required = true) const {
    if (width < 1 || height < 1) throw ConfigError("scene extent must be positive");
    if (min_objects < 0 || max_objects < min_objects) {
      throw ConfigError("scene object count range is empty");
    }
    if (objects_required && min_objects == 0) {
      throw ConfigError("scene spec allows zero objects but object crops require one");
    }
    if (min_object_size < 2 || max_object_size < min_object_size) {
      throw ConfigError("scene object size range is empty");
    }
    if (max_object_size > std::min(width, height)) {
      throw ConfigError("objects larger than the scene");
    }
  }
};

namespace detail {

template <typename Rng>
std::vector<BBox> place_boxes(Rng& rng, const SceneSpec& spec) {
  std::uniform_int_distribution<int> count_dist(spec.min_objects, spec.max_objects);
  std::uniform_int_distribution<int> size_dist(spec.min_object_size, spec.max_object_size);
  const int count = count_dist(rng);
  std::vector<BBox> boxes;
  constexpr int kMargin = 3;
  for (int attempt = 0; attempt < 200 && static_cast<int>(boxes.size()) < count; ++attempt) {
    const int w = size_dist(rng);
    const int h = size_dist(rng);
    std::uniform_int_distribution<int> xd(0, spec.width - w);
    std::uniform_int_distribution<int> yd(0, spec.height - h);
    const BBox cand{xd(rng), yd(rng), w, h};
    const bool clear = std::none_of(boxes.begin(), boxes.end(), [&](const BBox& b) {
      return cand.x < b.right() + kMargin && b.x < cand.right() + kMargin &&
             cand.y < b.bottom() + kMargin && b.y < cand.bottom() + kMargin;
    });
    if (clear) boxes.push_back(cand);
  }
  return boxes;
}

/// Sum of two random low-frequency plane waves with unit peak amplitude.
template <typename Rng>
std::vector<double> smooth_field(Rng& rng, int h, int w) {
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> period(12.0, 40.0);
  std::vector<double> field(static_cast<std::size_t>(h) * w, 0.0);
  for (int k = 0; k < 2; ++k) {
    const double a = angle(rng);
    const double p = period(rng);
    const double phase = angle(rng);
    const double fx = std::cos(a) * 2.0 * std::numbers::pi / p;
    const double fy = std::sin(a) * 2.0 * std::numbers::pi / p;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        field[static_cast<std::size_t>(y) * w + x] += 0.5 * std::sin(fx * x + fy * y + phase);
      }
    }
  }
  return field;
}

inline bool inside_ellipse(const BBox& b, int x, int y) {
  const double cx = b.x + b.w / 2.0;
  const double cy = b.y + b.h / 2.0;
  const double dx = (x + 0.5 - cx) / (b.w / 2.0);
  const double dy = (y + 0.5 - cy) / (b.h / 2.0);
  return dx * dx + dy * dy <= 1.0;
}

inline double quantize(double v) { return std::clamp(std::round(v), 0.0, 255.0); }

}  // namespace detail

/// Generates one synthetic scene.
///
/// IR: dark noisy background with overly bright, nearly flat elliptical
/// blobs. VI: mid-gray softly textured background with dark, striped,
/// sharp-edged rectangular targets. Boxes are tight around each object.
template <typename Rng>
Sample synth_scene(Rng& rng, Domain domain, const SceneSpec& spec) {
  spec.validate(false);
  const int h = spec.height;
  const int w = spec.width;
  std::vector<BBox> boxes = detail::place_boxes(rng, spec);
  std::normal_distribution<double> unit(0.0, 1.0);
  GrayImage img(h, w, ValueRange::UInt8);
  const auto field = detail::smooth_field(rng, h, w);

  if (domain == Domain::IR) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double v = spec.ir_background + 8.0 * field[static_cast<std::size_t>(y) * w + x] +
                         spec.ir_noise * unit(rng);
        img.at(y, x) = detail::quantize(v);
      }
    }
    for (const auto& b : boxes) {
      for (int y = b.y; y < b.bottom(); ++y) {
        for (int x = b.x; x < b.right(); ++x) {
          if (detail::inside_ellipse(b, x, y)) {
            img.at(y, x) = detail::quantize(spec.ir_object_level + 2.0 * unit(rng));
          }
        }
      }
    }
  } else {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double v = spec.vi_background +
                         spec.vi_texture * field[static_cast<std::size_t>(y) * w + x] +
                         3.0 * unit(rng);
        img.at(y, x) = detail::quantize(v);
      }
    }
    std::uniform_int_distribution<int> period_dist(2, 4);
    std::bernoulli_distribution horizontal(0.5);
    for (const auto& b : boxes) {
      const int period = period_dist(rng);
      const bool horiz = horizontal(rng);
      for (int y = b.y; y < b.bottom(); ++y) {
        for (int x = b.x; x < b.right(); ++x) {
          const int phase = horiz ? (y - b.y) : (x - b.x);
          const double stripe = ((phase / period) % 2 == 0) ? 1.0 : -1.0;
          img.at(y, x) = detail::quantize(spec.vi_object_level +
                                          spec.vi_object_texture * stripe + 3.0 * unit(rng));
        }
      }
    }
  }
  return Sample{std::move(img), std::move(boxes), domain, {}};
}

/// `count` independent scenes of one domain; scene i depends only on
/// (seed, i, domain). Ids are "<domain>_<i>".
inline std::vector<Sample> synthesize_set(Domain domain, int count, std::uint64_t seed,
                                          const SceneSpec& spec = {}) {
  if (count < 0) throw ConfigError("scene count must be >= 0");
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(domain)};
    std::mt19937_64 rng(seq);
    Sample s = synth_scene(rng, domain, spec);
    s.id = std::string(to_string(domain)) + "_" + std::to_string(i);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace thermvis
