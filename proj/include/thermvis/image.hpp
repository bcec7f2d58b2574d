#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "thermvis/error.hpp"
#include "thermvis/tensor.hpp"

namespace thermvis {

/// Value range tag carried by every image.
enum class ValueRange {
  UInt8,       ///< integral intensities in [0, 255]
  Normalized,  ///< reals in [-1, 1]
};

inline const char* to_string(ValueRange r) {
  return r == ValueRange::UInt8 ? "uint8" : "normalized";
}

/// Single-channel dense image, the sample carrier for both domains.
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int height, int width, ValueRange range, double fill = 0.0)
      : height_(height), width_(width), range_(range) {
    if (height < 1 || width < 1) {
      throw ShapeError("image extent must be at least 1x1, got " +
                       std::to_string(height) + "x" + std::to_string(width));
    }
    pixels_.assign(static_cast<std::size_t>(height) * width, fill);
  }

  static GrayImage from_pixels(int height, int width, ValueRange range,
                               std::vector<double> pixels) {
    GrayImage img(height, width, range);
    if (pixels.size() != img.pixels_.size()) {
      throw ShapeError("pixel count does not match image extent");
    }
    img.pixels_ = std::move(pixels);
    img.validate();
    return img;
  }

  int height() const { return height_; }
  int width() const { return width_; }
  ValueRange range() const { return range_; }
  std::size_t size() const { return pixels_.size(); }

  double& at(int y, int x) { return pixels_[index(y, x)]; }
  double at(int y, int x) const { return pixels_[index(y, x)]; }
  std::span<double> pixels() { return pixels_; }
  std::span<const double> pixels() const { return pixels_; }

  /// Throws ContractError if any pixel lies outside the tagged range.
  void validate() const {
    const double lo = range_ == ValueRange::UInt8 ? 0.0 : -1.0;
    const double hi = range_ == ValueRange::UInt8 ? 255.0 : 1.0;
    for (double v : pixels_) {
      if (!(v >= lo && v <= hi)) {
        throw ContractError(std::string("pixel value ") + std::to_string(v) +
                            " outside " + to_string(range_) + " range");
      }
    }
  }

  void require(ValueRange expected, const char* op) const {
    if (range_ != expected) {
      throw ContractError(std::string(op) + " expects a " + to_string(expected) +
                          " image, got " + to_string(range_));
    }
  }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

 private:
  std::size_t index(int y, int x) const {
    return static_cast<std::size_t>(y) * width_ + x;
  }

  int height_ = 0;
  int width_ = 0;
  ValueRange range_ = ValueRange::UInt8;
  std::vector<double> pixels_;
};

/// Axis-aligned pixel box: left, top, width, height.
struct BBox {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  long area() const { return static_cast<long>(w) * h; }
  int right() const { return x + w; }
  int bottom() const { return y + h; }

  bool valid_in(int width, int height) const {
    return w >= 1 && h >= 1 && x >= 0 && y >= 0 && right() <= width &&
           bottom() <= height;
  }

  /// Intersection with [0,width)x[0,height); nullopt if empty.
  std::optional<BBox> clipped(int width, int height) const {
    const int x0 = std::max(x, 0);
    const int y0 = std::max(y, 0);
    const int x1 = std::min(right(), width);
    const int y1 = std::min(bottom(), height);
    if (x1 <= x0 || y1 <= y0) return std::nullopt;
    return BBox{x0, y0, x1 - x0, y1 - y0};
  }

  friend bool operator==(const BBox&, const BBox&) = default;
};

enum class Domain { IR, VI };

inline const char* to_string(Domain d) { return d == Domain::IR ? "IR" : "VI"; }

inline Domain parse_domain(std::string_view s) {
  if (s == "IR" || s == "ir") return Domain::IR;
  if (s == "VI" || s == "vi") return Domain::VI;
  throw DataError("unknown domain tag '" + std::string(s) + "'");
}

/// An image with its annotations and domain tag.
struct Sample {
  GrayImage image;
  std::vector<BBox> boxes;
  Domain domain = Domain::IR;
  std::string id;

  void validate() const {
    for (const auto& b : boxes) {
      if (!b.valid_in(image.width(), image.height())) {
        throw DataError("sample '" + id + "': box outside image");
      }
    }
  }
};

/// CDF-remap histogram equalization over 256 bins.
///
/// A constant image has a degenerate CDF and is returned unchanged.
inline GrayImage histogram_equalize(const GrayImage& img) {
  img.require(ValueRange::UInt8, "histogram_equalize");
  std::array<long, 256> hist{};
  for (double v : img.pixels()) {
    ++hist[static_cast<std::size_t>(std::clamp(std::lround(v), 0L, 255L))];
  }
  std::array<long, 256> cdf{};
  long running = 0;
  for (std::size_t i = 0; i < 256; ++i) {
    running += hist[i];
    cdf[i] = running;
  }
  const long total = running;
  long cdf_min = 0;
  for (std::size_t i = 0; i < 256; ++i) {
    if (hist[i] > 0) {
      cdf_min = cdf[i];
      break;
    }
  }
  if (total == cdf_min) return img;

  std::array<double, 256> lut{};
  for (std::size_t i = 0; i < 256; ++i) {
    const double t = static_cast<double>(cdf[i] - cdf_min) /
                     static_cast<double>(total - cdf_min);
    lut[i] = std::round(std::clamp(t, 0.0, 1.0) * 255.0);
  }
  GrayImage out(img.height(), img.width(), ValueRange::UInt8);
  auto src = img.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[i] = lut[static_cast<std::size_t>(std::clamp(std::lround(src[i]), 0L, 255L))];
  }
  return out;
}

/// v -> v / 127.5 - 1
inline GrayImage normalize(const GrayImage& img) {
  img.require(ValueRange::UInt8, "normalize");
  GrayImage out(img.height(), img.width(), ValueRange::Normalized);
  auto src = img.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] / 127.5 - 1.0;
  return out;
}

/// Inverse of normalize, rounded to the nearest integer level.
inline GrayImage denormalize(const GrayImage& img) {
  img.require(ValueRange::Normalized, "denormalize");
  GrayImage out(img.height(), img.width(), ValueRange::UInt8);
  auto src = img.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[i] = std::clamp(std::round((src[i] + 1.0) * 127.5), 0.0, 255.0);
  }
  return out;
}

/// Stacks normalized images into an N x 1 x H x W tensor.
template <typename T>
Tensor<T> to_tensor(std::span<const GrayImage> images) {
  if (images.empty()) return {};
  const int h = images.front().height();
  const int w = images.front().width();
  Tensor<T> out(static_cast<int>(images.size()), 1, h, w);
  for (std::size_t n = 0; n < images.size(); ++n) {
    const auto& img = images[n];
    img.require(ValueRange::Normalized, "to_tensor");
    if (img.height() != h || img.width() != w) {
      throw ShapeError("to_tensor: images in a batch must share one extent");
    }
    T* dst = out.plane(static_cast<int>(n), 0);
    auto src = img.pixels();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<T>(src[i]);
  }
  return out;
}

template <typename T>
Tensor<T> to_tensor(const GrayImage& image) {
  return to_tensor<T>(std::span<const GrayImage>(&image, 1));
}

/// Extracts sample n (channel 0) as a normalized image, clamped into [-1, 1].
template <typename T>
GrayImage from_tensor(const Tensor<T>& t, int n = 0) {
  GrayImage out(t.h(), t.w(), ValueRange::Normalized);
  const T* src = t.plane(n, 0);
  auto dst = out.pixels();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i] = std::clamp(static_cast<double>(src[i]), -1.0, 1.0);
  }
  return out;
}

}  // namespace thermvis
