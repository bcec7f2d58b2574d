#pragma once

#include <random>
#include <vector>

#include "thermvis/error.hpp"
#include "thermvis/image.hpp"

namespace thermvis {

inline constexpr double kBoxRetention = 0.25;
inline constexpr int kCropAttempts = 100;

/// Crops the window at (left, top) and re-expresses boxes in crop coordinates.
/// Boxes keeping less than 25% of their area are dropped.
inline Sample crop_window(const Sample& sample, int left, int top, int size) {
  const GrayImage& src = sample.image;
  GrayImage img(size, size, src.range());
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) img.at(y, x) = src.at(top + y, left + x);
  }
  Sample out{std::move(img), {}, sample.domain, sample.id};
  for (const auto& b : sample.boxes) {
    const BBox moved{b.x - left, b.y - top, b.w, b.h};
    if (auto c = moved.clipped(size, size)) {
      if (static_cast<double>(c->area()) >= kBoxRetention * static_cast<double>(b.area())) {
        out.boxes.push_back(*c);
      }
    }
  }
  return out;
}

/// Random size x size crop that keeps at least one annotated object.
///
/// Rejection-samples up to 100 windows, then centers the crop on a
/// uniformly chosen box.
template <typename Rng>
Sample crop_with_object(const Sample& sample, int size, Rng& rng) {
  const int h = sample.image.height();
  const int w = sample.image.width();
  if (size < 1 || h < size || w < size) {
    throw ShapeError("crop_with_object: image " + std::to_string(h) + "x" +
                     std::to_string(w) + " smaller than crop " + std::to_string(size));
  }
  if (sample.boxes.empty()) {
    throw DataError("crop_with_object: sample '" + sample.id + "' has no boxes");
  }
  std::uniform_int_distribution<int> left_dist(0, w - size);
  std::uniform_int_distribution<int> top_dist(0, h - size);
  for (int attempt = 0; attempt < kCropAttempts; ++attempt) {
    const int left = left_dist(rng);
    const int top = top_dist(rng);
    Sample out = crop_window(sample, left, top, size);
    if (!out.boxes.empty()) return out;
  }

  std::uniform_int_distribution<std::size_t> pick(0, sample.boxes.size() - 1);
  const BBox& anchor = sample.boxes[pick(rng)];
  const int left = std::clamp(anchor.x + anchor.w / 2 - size / 2, 0, w - size);
  const int top = std::clamp(anchor.y + anchor.h / 2 - size / 2, 0, h - size);
  Sample out = crop_window(sample, left, top, size);
  if (out.boxes.empty()) {
    // anchor is too large for the retention rule; keep its visible part
    out.boxes.push_back(*BBox{anchor.x - left, anchor.y - top, anchor.w, anchor.h}
                             .clipped(size, size));
  }
  return out;
}

}  // namespace thermvis
