#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "thermvis/error.hpp"
#include "thermvis/image.hpp"
#include "thermvis/tensor.hpp"

namespace thermvis {

enum class RoiMethod { BilinearResize, MaxBins };

inline RoiMethod parse_roi_method(const std::string& s) {
  if (s == "bilinear_resize") return RoiMethod::BilinearResize;
  if (s == "max_bins") return RoiMethod::MaxBins;
  throw ConfigError("unknown roi method '" + s + "' (expected bilinear_resize|max_bins)");
}

inline const char* to_string(RoiMethod m) {
  return m == RoiMethod::BilinearResize ? "bilinear_resize" : "max_bins";
}

struct RoiPoolSpec {
  int out_size = 64;
  RoiMethod method = RoiMethod::BilinearResize;

  void validate() const {
    if (out_size < 2) throw ConfigError("roi out_size must be >= 2");
  }
};

/// Pooled patches plus what the backward pass needs.
template <typename T>
struct RoiPooled {
  Tensor<T> patches;        ///< K x C x S x S, one patch per box
  std::vector<int> owner;   ///< batch element of each patch
  std::vector<BBox> boxes;  ///< source box of each patch
  std::vector<int> argmax;  ///< max_bins only: source pixel per output cell
  Shape input_shape{};
  RoiPoolSpec spec{};
};

namespace detail {

/// Two-tap linear resampling of one axis: source = lo + t * (hi - lo).
struct Tap {
  int lo = 0;
  int hi = 0;
  double t = 0.0;
};

/// Half-pixel-centred sampling positions of `out` cells over a `len`-pixel span,
/// clamped to the span so no tap leaves the box.
inline std::vector<Tap> resample_taps(int start, int len, int out) {
  std::vector<Tap> taps(static_cast<std::size_t>(out));
  const double scale = static_cast<double>(len) / out;
  for (int i = 0; i < out; ++i) {
    double u = (i + 0.5) * scale - 0.5;
    u = std::clamp(u, 0.0, static_cast<double>(len - 1));
    const int i0 = static_cast<int>(std::floor(u));
    const int i1 = std::min(i0 + 1, len - 1);
    taps[static_cast<std::size_t>(i)] = Tap{start + i0, start + i1, u - i0};
  }
  return taps;
}

/// [begin, end) pixel range of bin i out of `out` over a `len`-pixel span.
inline std::pair<int, int> bin_range(int start, int len, int out, int i) {
  const int b = (i * len) / out;
  const int e = std::min(len, ((i + 1) * len + out - 1) / out);
  return {start + b, start + std::max(e, b + 1)};
}

}  // namespace detail

/// Crops each box and reshapes it to out_size x out_size.
///
/// `boxes[n]` lists the boxes of batch element n. Patches are emitted in
/// element order, then box order. Each patch depends only on pixels inside
/// its own box.
template <typename T>
RoiPooled<T> roi_pool(const Tensor<T>& img, std::span<const std::vector<BBox>> boxes,
                      const RoiPoolSpec& spec) {
  spec.validate();
  if (static_cast<int>(boxes.size()) != img.n()) {
    throw ShapeError("roi_pool: one box list per batch element required");
  }
  RoiPooled<T> out;
  out.input_shape = img.shape();
  out.spec = spec;
  for (int n = 0; n < img.n(); ++n) {
    for (const auto& b : boxes[static_cast<std::size_t>(n)]) {
      if (!b.valid_in(img.w(), img.h())) {
        throw ContractError("roi_pool: box (" + std::to_string(b.x) + "," + std::to_string(b.y) +
                            "," + std::to_string(b.w) + "," + std::to_string(b.h) +
                            ") outside " + std::to_string(img.w()) + "x" +
                            std::to_string(img.h()) + " image");
      }
      out.owner.push_back(n);
      out.boxes.push_back(b);
    }
  }
  const int k = static_cast<int>(out.boxes.size());
  const int s = spec.out_size;
  const int c = img.c();
  out.patches = Tensor<T>(Shape{k, c, s, s});
  if (spec.method == RoiMethod::MaxBins) out.argmax.assign(static_cast<std::size_t>(k) * c * s * s, 0);

  for (int p = 0; p < k; ++p) {
    const BBox& b = out.boxes[static_cast<std::size_t>(p)];
    const int n = out.owner[static_cast<std::size_t>(p)];
    if (spec.method == RoiMethod::BilinearResize) {
      const auto ty = detail::resample_taps(b.y, b.h, s);
      const auto tx = detail::resample_taps(b.x, b.w, s);
      for (int ch = 0; ch < c; ++ch) {
        const T* src = img.plane(n, ch);
        T* dst = out.patches.plane(p, ch);
        for (int i = 0; i < s; ++i) {
          const auto& vy = ty[static_cast<std::size_t>(i)];
          for (int j = 0; j < s; ++j) {
            const auto& vx = tx[static_cast<std::size_t>(j)];
            const double a = src[vy.lo * img.w() + vx.lo];
            const double bb = src[vy.lo * img.w() + vx.hi];
            const double cc = src[vy.hi * img.w() + vx.lo];
            const double d = src[vy.hi * img.w() + vx.hi];
            const double top = a + vx.t * (bb - a);
            const double bot = cc + vx.t * (d - cc);
            dst[i * s + j] = static_cast<T>(top + vy.t * (bot - top));
          }
        }
      }
    } else {
      for (int ch = 0; ch < c; ++ch) {
        const T* src = img.plane(n, ch);
        T* dst = out.patches.plane(p, ch);
        for (int i = 0; i < s; ++i) {
          const auto [y0, y1] = detail::bin_range(b.y, b.h, s, i);
          for (int j = 0; j < s; ++j) {
            const auto [x0, x1] = detail::bin_range(b.x, b.w, s, j);
            int best = y0 * img.w() + x0;
            for (int y = y0; y < y1; ++y) {
              for (int x = x0; x < x1; ++x) {
                if (src[y * img.w() + x] > src[best]) best = y * img.w() + x;
              }
            }
            dst[i * s + j] = src[best];
            out.argmax[((static_cast<std::size_t>(p) * c + ch) * s + i) * s + j] = best;
          }
        }
      }
    }
  }
  return out;
}

/// Gradient of a scalar w.r.t. the pooled image, given its gradient w.r.t. the patches.
template <typename T>
Tensor<T> roi_pool_backward(const RoiPooled<T>& pooled, const Tensor<T>& dpatches) {
  if (!(dpatches.shape() == pooled.patches.shape())) {
    throw ShapeError("roi_pool_backward: gradient shape mismatch");
  }
  Tensor<T> dimg(pooled.input_shape);
  const int s = pooled.spec.out_size;
  const int c = pooled.input_shape.c;
  const int w = pooled.input_shape.w;
  for (std::size_t p = 0; p < pooled.boxes.size(); ++p) {
    const BBox& b = pooled.boxes[p];
    const int n = pooled.owner[p];
    for (int ch = 0; ch < c; ++ch) {
      const T* d = dpatches.plane(static_cast<int>(p), ch);
      T* g = dimg.plane(n, ch);
      if (pooled.spec.method == RoiMethod::BilinearResize) {
        const auto ty = detail::resample_taps(b.y, b.h, s);
        const auto tx = detail::resample_taps(b.x, b.w, s);
        for (int i = 0; i < s; ++i) {
          const auto& vy = ty[static_cast<std::size_t>(i)];
          for (int j = 0; j < s; ++j) {
            const auto& vx = tx[static_cast<std::size_t>(j)];
            const double v = d[i * s + j];
            g[vy.lo * w + vx.lo] += static_cast<T>(v * (1 - vy.t) * (1 - vx.t));
            g[vy.lo * w + vx.hi] += static_cast<T>(v * (1 - vy.t) * vx.t);
            g[vy.hi * w + vx.lo] += static_cast<T>(v * vy.t * (1 - vx.t));
            g[vy.hi * w + vx.hi] += static_cast<T>(v * vy.t * vx.t);
          }
        }
      } else {
        for (int i = 0; i < s * s; ++i) {
          g[pooled.argmax[(p * c + ch) * s * s + i]] += d[i];
        }
      }
    }
  }
  return dimg;
}

/// Convenience form for a single image.
template <typename T = double>
std::vector<GrayImage> roi_pool(const GrayImage& img, const std::vector<BBox>& boxes,
                                const RoiPoolSpec& spec) {
  const std::vector<std::vector<BBox>> per_element{boxes};
  const Tensor<T> t = [&] {
    Tensor<T> x(1, 1, img.height(), img.width());
    auto px = img.pixels();
    for (std::size_t i = 0; i < px.size(); ++i) x[i] = static_cast<T>(px[i]);
    return x;
  }();
  const auto pooled = roi_pool<T>(t, per_element, spec);
  std::vector<GrayImage> out;
  for (int k = 0; k < pooled.patches.n(); ++k) {
    GrayImage patch(spec.out_size, spec.out_size, img.range());
    const T* src = pooled.patches.plane(k, 0);
    auto dst = patch.pixels();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<double>(src[i]);
    out.push_back(std::move(patch));
  }
  return out;
}

}  // namespace thermvis
