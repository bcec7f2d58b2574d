#pragma once

#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "thermvis/error.hpp"
#include "thermvis/tensor.hpp"

namespace thermvis {

enum class Mode { Train, Eval };
enum class PadMode { Zero, Reflect };
enum class NormKind { None, Batch, Instance };

inline const char* to_string(NormKind k) {
  switch (k) {
    case NormKind::Batch: return "batch";
    case NormKind::Instance: return "instance";
    default: return "none";
  }
}

inline NormKind parse_norm(const std::string& s) {
  if (s == "batch") return NormKind::Batch;
  if (s == "instance") return NormKind::Instance;
  if (s == "none") return NormKind::None;
  throw ConfigError("unknown norm '" + s + "' (expected batch|instance|none)");
}

/// A trainable array together with its accumulated gradient.
template <typename T>
struct Param {
  Tensor<T> value;
  Tensor<T> grad;

  explicit Param(Shape s = {}) : value(s), grad(s) {}
};

/// Flat, stably named view of a network's state.
template <typename T>
struct StateView {
  std::vector<std::pair<std::string, Param<T>*>> params;
  std::vector<std::pair<std::string, Tensor<T>*>> buffers;
};

/// Per-invocation activations a layer needs for its backward pass.
template <typename T>
struct LayerCache {
  Shape input_shape{};
  Tensor<T> saved;
  std::vector<T> stats;
  bool frozen_stats = false;
  std::vector<LayerCache> children;
};

template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;

  /// Train-mode forward may update normalization running statistics.
  /// Pass a cache to enable backward.
  virtual Tensor<T> forward(const Tensor<T>& x, Mode mode, LayerCache<T>* cache) = 0;

  /// Eval-mode forward without side effects.
  virtual Tensor<T> infer(const Tensor<T>& x) const = 0;

  /// Returns dL/dx. Accumulates parameter gradients when `param_grads`.
  virtual Tensor<T> backward(const Tensor<T>& dy, const LayerCache<T>& cache,
                             bool param_grads) = 0;

  virtual void collect(const std::string& prefix, StateView<T>& view) { (void)prefix, (void)view; }

  virtual void initialize(std::mt19937_64& rng, double stddev) { (void)rng, (void)stddev; }
};

// ---------------------------------------------------------------------------
// im2col machinery

/// Sliding-window geometry from an input plane to an output plane.
struct ConvGeometry {
  int in_h = 0, in_w = 0;
  int out_h = 0, out_w = 0;
  int kernel = 1, stride = 1, pad = 0;
  PadMode mode = PadMode::Zero;

  static ConvGeometry make(int in_h, int in_w, int kernel, int stride, int pad, PadMode mode) {
    ConvGeometry g{in_h, in_w, 0, 0, kernel, stride, pad, mode};
    g.out_h = (in_h + 2 * pad - kernel) / stride + 1;
    g.out_w = (in_w + 2 * pad - kernel) / stride + 1;
    if (in_h + 2 * pad < kernel || in_w + 2 * pad < kernel || g.out_h < 1 || g.out_w < 1) {
      throw ShapeError("input " + std::to_string(in_h) + "x" + std::to_string(in_w) +
                       " too small for a " + std::to_string(kernel) + "x" +
                       std::to_string(kernel) + " kernel");
    }
    if (mode == PadMode::Reflect && (pad >= in_h || pad >= in_w)) {
      throw ShapeError("reflection padding " + std::to_string(pad) +
                       " needs an input larger than the pad, got " + std::to_string(in_h) +
                       "x" + std::to_string(in_w));
    }
    return g;
  }

  int in_plane() const { return in_h * in_w; }
  int out_plane() const { return out_h * out_w; }
  int taps() const { return kernel * kernel; }
};

namespace detail {

inline int reflect(int i, int n) {
  if (i < 0) return -i;
  if (i >= n) return 2 * n - 2 - i;
  return i;
}

/// table[tap * out_plane + p] = source pixel index, or -1 for zero padding.
inline std::vector<int> gather_table(const ConvGeometry& g) {
  std::vector<int> table(static_cast<std::size_t>(g.taps()) * g.out_plane());
  std::size_t k = 0;
  for (int ky = 0; ky < g.kernel; ++ky) {
    for (int kx = 0; kx < g.kernel; ++kx) {
      for (int oy = 0; oy < g.out_h; ++oy) {
        for (int ox = 0; ox < g.out_w; ++ox) {
          int iy = oy * g.stride - g.pad + ky;
          int ix = ox * g.stride - g.pad + kx;
          if (g.mode == PadMode::Reflect) {
            iy = reflect(iy, g.in_h);
            ix = reflect(ix, g.in_w);
            table[k++] = iy * g.in_w + ix;
          } else if (iy < 0 || iy >= g.in_h || ix < 0 || ix >= g.in_w) {
            table[k++] = -1;
          } else {
            table[k++] = iy * g.in_w + ix;
          }
        }
      }
    }
  }
  return table;
}

template <typename T>
void im2col(const T* x, int channels, const ConvGeometry& g, const std::vector<int>& table,
            T* col) {
  const std::size_t rows = static_cast<std::size_t>(g.taps()) * g.out_plane();
  for (int c = 0; c < channels; ++c) {
    const T* src = x + static_cast<std::size_t>(c) * g.in_plane();
    T* dst = col + c * rows;
    for (std::size_t i = 0; i < rows; ++i) {
      const int idx = table[i];
      dst[i] = idx < 0 ? T{0} : src[idx];
    }
  }
}

template <typename T>
void col2im(const T* col, int channels, const ConvGeometry& g, const std::vector<int>& table,
            T* x) {
  const std::size_t rows = static_cast<std::size_t>(g.taps()) * g.out_plane();
  for (int c = 0; c < channels; ++c) {
    T* dst = x + static_cast<std::size_t>(c) * g.in_plane();
    const T* src = col + c * rows;
    for (std::size_t i = 0; i < rows; ++i) {
      const int idx = table[i];
      if (idx >= 0) dst[idx] += src[i];
    }
  }
}

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

}  // namespace detail

// ---------------------------------------------------------------------------

/// k x k convolution with configurable stride and zero/reflection padding.
template <typename T>
class Conv2d final : public Layer<T> {
 public:
  Conv2d(int in_ch, int out_ch, int kernel, int stride, int pad, PadMode mode, bool bias)
      : in_ch_(in_ch), out_ch_(out_ch), kernel_(kernel), stride_(stride), pad_(pad),
        mode_(mode), has_bias_(bias), weight_(Shape{out_ch, in_ch, kernel, kernel}),
        bias_(Shape{1, bias ? out_ch : 0, 1, 1}) {}

  Param<T>& weight() { return weight_; }
  Param<T>& bias() { return bias_; }
  bool has_bias() const { return has_bias_; }

  Tensor<T> forward(const Tensor<T>& x, Mode, LayerCache<T>* cache) override {
    return run(x, cache);
  }
  Tensor<T> infer(const Tensor<T>& x) const override { return run(x, nullptr); }

  Tensor<T> backward(const Tensor<T>& dy, const LayerCache<T>& cache,
                     bool param_grads) override {
    const Shape& in = cache.input_shape;
    const auto g = geometry(in);
    const auto table = detail::gather_table(g);
    const int rows = in_ch_ * g.taps();
    const int p = g.out_plane();
    Tensor<T> dx(in);
    AlignedVector<T> dcol(static_cast<std::size_t>(rows) * p);
    detail::ConstMatMap<T> w(weight_.value.data(), out_ch_, rows);
    for (int n = 0; n < in.n; ++n) {
      detail::ConstMatMap<T> dyn(dy.sample(n), out_ch_, p);
      if (param_grads) {
        detail::ConstMatMap<T> col(cache.saved.sample(n), rows, p);
        detail::MatMap<T>(weight_.grad.data(), out_ch_, rows).noalias() += dyn * col.transpose();
        if (has_bias_) {
          for (int o = 0; o < out_ch_; ++o) bias_.grad[o] += dyn.row(o).sum();
        }
      }
      detail::MatMap<T>(dcol.data(), rows, p).noalias() = w.transpose() * dyn;
      detail::col2im(dcol.data(), in_ch_, g, table, dx.sample(n));
    }
    return dx;
  }

  void collect(const std::string& prefix, StateView<T>& view) override {
    view.params.emplace_back(prefix + ".weight", &weight_);
    if (has_bias_) view.params.emplace_back(prefix + ".bias", &bias_);
  }

  void initialize(std::mt19937_64& rng, double stddev) override {
    std::normal_distribution<double> dist(0.0, stddev);
    for (auto& v : weight_.value.values()) v = static_cast<T>(dist(rng));
    bias_.value.zero();
  }

 private:
  ConvGeometry geometry(const Shape& in) const {
    if (in.c != in_ch_) {
      throw ShapeError("conv expects " + std::to_string(in_ch_) + " channels, got " +
                       std::to_string(in.c));
    }
    return ConvGeometry::make(in.h, in.w, kernel_, stride_, pad_, mode_);
  }

  Tensor<T> run(const Tensor<T>& x, LayerCache<T>* cache) const {
    const auto g = geometry(x.shape());
    const auto table = detail::gather_table(g);
    const int rows = in_ch_ * g.taps();
    const int p = g.out_plane();
    Tensor<T> out(x.n(), out_ch_, g.out_h, g.out_w);
    Tensor<T> cols(Shape{x.n(), rows, 1, p});
    detail::ConstMatMap<T> w(weight_.value.data(), out_ch_, rows);
    for (int n = 0; n < x.n(); ++n) {
      detail::im2col(x.sample(n), in_ch_, g, table, cols.sample(n));
      detail::MatMap<T> y(out.sample(n), out_ch_, p);
      y.noalias() = w * detail::ConstMatMap<T>(cols.sample(n), rows, p);
      if (has_bias_) {
        for (int o = 0; o < out_ch_; ++o) y.row(o).array() += bias_.value[o];
      }
    }
    if (cache) {
      cache->input_shape = x.shape();
      cache->saved = std::move(cols);
    }
    return out;
  }

  int in_ch_, out_ch_, kernel_, stride_, pad_;
  PadMode mode_;
  bool has_bias_;
  Param<T> weight_;
  Param<T> bias_;
};

/// 3x3 fractionally strided (stride 1/2) convolution; output is exactly 2x the input.
///
/// Implemented as the adjoint of a stride-2, padding-1 convolution with one
/// extra row/column of output padding.
template <typename T>
class ConvTranspose2d final : public Layer<T> {
 public:
  ConvTranspose2d(int in_ch, int out_ch, bool bias)
      : in_ch_(in_ch), out_ch_(out_ch), has_bias_(bias),
        weight_(Shape{in_ch, out_ch, kKernel, kKernel}),
        bias_(Shape{1, bias ? out_ch : 0, 1, 1}) {}

  Param<T>& weight() { return weight_; }

  Tensor<T> forward(const Tensor<T>& x, Mode, LayerCache<T>* cache) override {
    if (cache) {
      cache->input_shape = x.shape();
      cache->saved = x;
    }
    return run(x);
  }
  Tensor<T> infer(const Tensor<T>& x) const override { return run(x); }

  Tensor<T> backward(const Tensor<T>& dy, const LayerCache<T>& cache,
                     bool param_grads) override {
    const Shape& in = cache.input_shape;
    const auto g = geometry(in);
    const auto table = detail::gather_table(g);
    const int rows = out_ch_ * g.taps();
    const int p = g.out_plane();
    Tensor<T> dx(in);
    AlignedVector<T> dcol(static_cast<std::size_t>(rows) * p);
    detail::ConstMatMap<T> w(weight_.value.data(), in_ch_, rows);
    for (int n = 0; n < in.n; ++n) {
      detail::im2col(dy.sample(n), out_ch_, g, table, dcol.data());
      detail::ConstMatMap<T> dc(dcol.data(), rows, p);
      detail::MatMap<T>(dx.sample(n), in_ch_, p).noalias() = w * dc;
      if (param_grads) {
        detail::ConstMatMap<T> xn(cache.saved.sample(n), in_ch_, p);
        detail::MatMap<T>(weight_.grad.data(), in_ch_, rows).noalias() += xn * dc.transpose();
        if (has_bias_) {
          const std::size_t big = static_cast<std::size_t>(g.in_plane());
          for (int o = 0; o < out_ch_; ++o) {
            const T* d = dy.plane(n, o);
            T s{0};
            for (std::size_t i = 0; i < big; ++i) s += d[i];
            bias_.grad[o] += s;
          }
        }
      }
    }
    return dx;
  }

  void collect(const std::string& prefix, StateView<T>& view) override {
    view.params.emplace_back(prefix + ".weight", &weight_);
    if (has_bias_) view.params.emplace_back(prefix + ".bias", &bias_);
  }

  void initialize(std::mt19937_64& rng, double stddev) override {
    std::normal_distribution<double> dist(0.0, stddev);
    for (auto& v : weight_.value.values()) v = static_cast<T>(dist(rng));
    bias_.value.zero();
  }

 private:
  static constexpr int kKernel = 3;

  // Geometry of the adjoint convolution: from the 2H x 2W output back to H x W.
  ConvGeometry geometry(const Shape& in) const {
    if (in.c != in_ch_) {
      throw ShapeError("transposed conv expects " + std::to_string(in_ch_) +
                       " channels, got " + std::to_string(in.c));
    }
    ConvGeometry g{2 * in.h, 2 * in.w, in.h, in.w, kKernel, 2, 1, PadMode::Zero};
    return g;
  }

  Tensor<T> run(const Tensor<T>& x) const {
    const auto g = geometry(x.shape());
    const auto table = detail::gather_table(g);
    const int rows = out_ch_ * g.taps();
    const int p = g.out_plane();
    Tensor<T> out(x.n(), out_ch_, g.in_h, g.in_w);
    AlignedVector<T> col(static_cast<std::size_t>(rows) * p);
    detail::ConstMatMap<T> w(weight_.value.data(), in_ch_, rows);
    for (int n = 0; n < x.n(); ++n) {
      detail::MatMap<T>(col.data(), rows, p).noalias() =
          w.transpose() * detail::ConstMatMap<T>(x.sample(n), in_ch_, p);
      detail::col2im(col.data(), out_ch_, g, table, out.sample(n));
      if (has_bias_) {
        const std::size_t big = static_cast<std::size_t>(g.in_plane());
        for (int o = 0; o < out_ch_; ++o) {
          T* d = out.plane(n, o);
          for (std::size_t i = 0; i < big; ++i) d[i] += bias_.value[o];
        }
      }
    }
    return out;
  }

  int in_ch_, out_ch_;
  bool has_bias_;
  Param<T> weight_;
  Param<T> bias_;
};

/// Batch or instance normalization with a learned per-channel scale and shift.
///
/// Batch statistics are taken over (N, H, W) in train mode; eval mode uses the
/// running estimates. Instance statistics are taken over (H, W) in both modes.
template <typename T>
class Norm final : public Layer<T> {
 public:
  Norm(NormKind kind, int channels)
      : kind_(kind), channels_(channels), scale_(Shape{1, channels, 1, 1}),
        shift_(Shape{1, channels, 1, 1}), running_mean_(Shape{1, channels, 1, 1}),
        running_var_(Shape{1, channels, 1, 1}, T{1}) {
    if (kind == NormKind::None) throw ConfigError("Norm layer needs batch or instance kind");
    scale_.value.fill(T{1});
  }

  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.1;

  NormKind kind() const { return kind_; }
  Param<T>& scale() { return scale_; }
  Param<T>& shift() { return shift_; }
  Tensor<T>& running_mean() { return running_mean_; }
  Tensor<T>& running_var() { return running_var_; }

  Tensor<T> forward(const Tensor<T>& x, Mode mode, LayerCache<T>* cache) override {
    const bool use_running = kind_ == NormKind::Batch && mode == Mode::Eval;
    std::vector<T> mean, var;
    batch_stats(x, use_running, mean, var);
    if (kind_ == NormKind::Batch && mode == Mode::Train) {
      const double m = static_cast<double>(x.n()) * x.shape().plane();
      const double unbias = m > 1 ? m / (m - 1) : 1.0;
      for (int c = 0; c < channels_; ++c) {
        running_mean_[c] = static_cast<T>((1 - kMomentum) * running_mean_[c] + kMomentum * mean[c]);
        running_var_[c] =
            static_cast<T>((1 - kMomentum) * running_var_[c] + kMomentum * var[c] * unbias);
      }
    }
    return apply(x, mean, var, cache, use_running);
  }

  Tensor<T> infer(const Tensor<T>& x) const override {
    std::vector<T> mean, var;
    batch_stats(x, kind_ == NormKind::Batch, mean, var);
    return apply(x, mean, var, nullptr, kind_ == NormKind::Batch);
  }

  Tensor<T> backward(const Tensor<T>& dy, const LayerCache<T>& cache,
                     bool param_grads) override {
    const Shape& s = cache.input_shape;
    const Tensor<T>& xhat = cache.saved;
    Tensor<T> dx(s);
    const std::size_t hw = s.plane();
    const int groups_per_channel = kind_ == NormKind::Batch ? 1 : s.n;
    for (int c = 0; c < channels_; ++c) {
      const T gamma = scale_.value[c];
      T dgamma{0}, dbeta{0};
      for (int gi = 0; gi < groups_per_channel; ++gi) {
        const int n0 = kind_ == NormKind::Batch ? 0 : gi;
        const int n1 = kind_ == NormKind::Batch ? s.n : gi + 1;
        const T inv_std = cache.stats[static_cast<std::size_t>(gi) * channels_ + c];
        double sum_d = 0, sum_dx = 0;
        for (int n = n0; n < n1; ++n) {
          const T* d = dy.plane(n, c);
          const T* xh = xhat.plane(n, c);
          for (std::size_t i = 0; i < hw; ++i) {
            sum_d += d[i];
            sum_dx += static_cast<double>(d[i]) * xh[i];
          }
        }
        dgamma += static_cast<T>(sum_dx);
        dbeta += static_cast<T>(sum_d);
        const double m = static_cast<double>(n1 - n0) * hw;
        const T mean_d = static_cast<T>(sum_d / m);
        const T mean_dx = static_cast<T>(sum_dx / m);
        for (int n = n0; n < n1; ++n) {
          const T* d = dy.plane(n, c);
          const T* xh = xhat.plane(n, c);
          T* o = dx.plane(n, c);
          if (cache.frozen_stats) {
            for (std::size_t i = 0; i < hw; ++i) o[i] = d[i] * gamma * inv_std;
          } else {
            for (std::size_t i = 0; i < hw; ++i) {
              o[i] = gamma * inv_std * (d[i] - mean_d - xh[i] * mean_dx);
            }
          }
        }
      }
      if (param_grads) {
        scale_.grad[c] += dgamma;
        shift_.grad[c] += dbeta;
      }
    }
    return dx;
  }

  void collect(const std::string& prefix, StateView<T>& view) override {
    view.params.emplace_back(prefix + ".weight", &scale_);
    view.params.emplace_back(prefix + ".bias", &shift_);
    if (kind_ == NormKind::Batch) {
      view.buffers.emplace_back(prefix + ".running_mean", &running_mean_);
      view.buffers.emplace_back(prefix + ".running_var", &running_var_);
    }
  }

  void initialize(std::mt19937_64&, double) override {
    scale_.value.fill(T{1});
    shift_.value.zero();
    running_mean_.zero();
    running_var_.fill(T{1});
  }

 private:
  // mean/var indexed [group * C + c]; one group for batch norm, N for instance norm.
  void batch_stats(const Tensor<T>& x, bool use_running, std::vector<T>& mean,
                   std::vector<T>& var) const {
    if (x.c() != channels_) {
      throw ShapeError("norm expects " + std::to_string(channels_) + " channels, got " +
                       std::to_string(x.c()));
    }
    const std::size_t hw = x.shape().plane();
    if (use_running) {
      mean.assign(running_mean_.values().begin(), running_mean_.values().end());
      var.assign(running_var_.values().begin(), running_var_.values().end());
      return;
    }
    const int groups = kind_ == NormKind::Batch ? 1 : x.n();
    mean.assign(static_cast<std::size_t>(groups) * channels_, T{0});
    var.assign(mean.size(), T{0});
    for (int gi = 0; gi < groups; ++gi) {
      const int n0 = kind_ == NormKind::Batch ? 0 : gi;
      const int n1 = kind_ == NormKind::Batch ? x.n() : gi + 1;
      for (int c = 0; c < channels_; ++c) {
        double s = 0;
        for (int n = n0; n < n1; ++n) {
          const T* p = x.plane(n, c);
          for (std::size_t i = 0; i < hw; ++i) s += p[i];
        }
        const double m = static_cast<double>(n1 - n0) * hw;
        const double mu = s / m;
        double ss = 0;
        for (int n = n0; n < n1; ++n) {
          const T* p = x.plane(n, c);
          for (std::size_t i = 0; i < hw; ++i) ss += (p[i] - mu) * (p[i] - mu);
        }
        mean[static_cast<std::size_t>(gi) * channels_ + c] = static_cast<T>(mu);
        var[static_cast<std::size_t>(gi) * channels_ + c] = static_cast<T>(ss / m);
      }
    }
  }

  Tensor<T> apply(const Tensor<T>& x, const std::vector<T>& mean, const std::vector<T>& var,
                  LayerCache<T>* cache, bool frozen) const {
    const std::size_t hw = x.shape().plane();
    const bool per_instance = kind_ == NormKind::Instance;
    Tensor<T> out(x.shape());
    Tensor<T> xhat(cache ? x.shape() : Shape{});
    std::vector<T> inv_std(mean.size());
    for (std::size_t i = 0; i < mean.size(); ++i) {
      inv_std[i] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(var[i]) + kEps));
    }
    for (int n = 0; n < x.n(); ++n) {
      for (int c = 0; c < channels_; ++c) {
        const std::size_t gi = (per_instance ? static_cast<std::size_t>(n) * channels_ : 0) + c;
        const T mu = mean[gi];
        const T is = inv_std[gi];
        const T gamma = scale_.value[c];
        const T beta = shift_.value[c];
        const T* src = x.plane(n, c);
        T* dst = out.plane(n, c);
        T* xh = cache ? xhat.plane(n, c) : nullptr;
        for (std::size_t i = 0; i < hw; ++i) {
          const T v = (src[i] - mu) * is;
          if (xh) xh[i] = v;
          dst[i] = gamma * v + beta;
        }
      }
    }
    if (cache) {
      cache->input_shape = x.shape();
      cache->saved = std::move(xhat);
      cache->stats = std::move(inv_std);
      cache->frozen_stats = frozen;
    }
    return out;
  }

  NormKind kind_;
  int channels_;
  Param<T> scale_;
  Param<T> shift_;
  Tensor<T> running_mean_;
  Tensor<T> running_var_;
};

/// max(x, slope * x); slope 0 is a plain ReLU.
template <typename T>
class LeakyRelu final : public Layer<T> {
 public:
  explicit LeakyRelu(double slope = 0.0) : slope_(static_cast<T>(slope)) {}

  T slope() const { return slope_; }

  Tensor<T> forward(const Tensor<T>& x, Mode, LayerCache<T>* cache) override {
    if (cache) {
      cache->input_shape = x.shape();
      cache->saved = x;
    }
    return infer(x);
  }
  Tensor<T> infer(const Tensor<T>& x) const override {
    Tensor<T> out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > T{0} ? x[i] : slope_ * x[i];
    return out;
  }
  Tensor<T> backward(const Tensor<T>& dy, const LayerCache<T>& cache, bool) override {
    Tensor<T> dx(dy.shape());
    for (std::size_t i = 0; i < dy.size(); ++i) {
      dx[i] = cache.saved[i] > T{0} ? dy[i] : slope_ * dy[i];
    }
    return dx;
  }

 private:
  T slope_;
};

/// Named chain of layers.
template <typename T>
class Sequential final : public Layer<T> {
 public:
  Sequential() = default;
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;

  template <typename L, typename... Args>
  L& add(std::string name, Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    layers_.emplace_back(std::move(name), std::move(layer));
    return ref;
  }

  std::size_t size() const { return layers_.size(); }
  Layer<T>& at(std::size_t i) { return *layers_[i].second; }
  const std::string& name(std::size_t i) const { return layers_[i].first; }

  Tensor<T> forward(const Tensor<T>& x, Mode mode, LayerCache<T>* cache) override {
    if (cache) {
      cache->input_shape = x.shape();
      cache->children.assign(layers_.size(), {});
    }
    Tensor<T> h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      h = layers_[i].second->forward(h, mode, cache ? &cache->children[i] : nullptr);
    }
    return h;
  }

  Tensor<T> infer(const Tensor<T>& x) const override {
    Tensor<T> h = x;
    for (const auto& [name, layer] : layers_) h = layer->infer(h);
    return h;
  }

  Tensor<T> backward(const Tensor<T>& dy, const LayerCache<T>& cache,
                     bool param_grads) override {
    Tensor<T> g = dy;
    for (std::size_t i = layers_.size(); i-- > 0;) {
      g = layers_[i].second->backward(g, cache.children[i], param_grads);
    }
    return g;
  }

  void collect(const std::string& prefix, StateView<T>& view) override {
    for (auto& [name, layer] : layers_) {
      layer->collect(prefix.empty() ? name : prefix + "." + name, view);
    }
  }

  void initialize(std::mt19937_64& rng, double stddev) override {
    for (auto& [name, layer] : layers_) layer->initialize(rng, stddev);
  }

 private:
  std::vector<std::pair<std::string, std::unique_ptr<Layer<T>>>> layers_;
};

/// y = x + body(x), no activation after the sum.
template <typename T>
class Residual final : public Layer<T> {
 public:
  explicit Residual(Sequential<T> body) : body_(std::move(body)) {}

  Sequential<T>& body() { return body_; }

  Tensor<T> forward(const Tensor<T>& x, Mode mode, LayerCache<T>* cache) override {
    LayerCache<T>* child = nullptr;
    if (cache) {
      cache->input_shape = x.shape();
      cache->children.assign(1, {});
      child = &cache->children[0];
    }
    Tensor<T> y = body_.forward(x, mode, child);
    y += x;
    return y;
  }
  Tensor<T> infer(const Tensor<T>& x) const override {
    Tensor<T> y = body_.infer(x);
    y += x;
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy, const LayerCache<T>& cache,
                     bool param_grads) override {
    Tensor<T> dx = body_.backward(dy, cache.children[0], param_grads);
    dx += dy;
    return dx;
  }
  void collect(const std::string& prefix, StateView<T>& view) override {
    body_.collect(prefix, view);
  }
  void initialize(std::mt19937_64& rng, double stddev) override {
    body_.initialize(rng, stddev);
  }

 private:
  Sequential<T> body_;
};

template <typename T>
void zero_grads(StateView<T>& view) {
  for (auto& [name, p] : view.params) p->grad.zero();
}

}  // namespace thermvis
