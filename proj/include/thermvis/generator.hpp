#pragma once

#include <random>
#include <string>

#include "thermvis/error.hpp"
#include "thermvis/image.hpp"
#include "thermvis/layers.hpp"

namespace thermvis {

/// Structure-connected residual auto-encoder configuration.
///
/// The main branch is c7s1-f, d2f, d4f, n x R4f, u2f, uf, c7s1-out.
struct GeneratorConfig {
  int base_filters = 32;
  int n_res_blocks = 9;
  int in_channels = 1;
  int out_channels = 1;
  NormKind norm = NormKind::Batch;
  PadMode padding = PadMode::Reflect;
  bool structure_connection = true;

  void validate() const {
    if (base_filters < 1) throw ConfigError("generator base_filters must be >= 1");
    if (n_res_blocks < 0) throw ConfigError("generator n_res_blocks must be >= 0");
    if (in_channels < 1 || out_channels < 1) throw ConfigError("generator channels must be >= 1");
    if (structure_connection && in_channels != out_channels) {
      throw ConfigError("structure connection needs in_channels == out_channels");
    }
  }
};

template <typename T>
class Generator {
 public:
  /// Activations of one forward pass.
  struct Trace {
    LayerCache<T> main;
    LayerCache<T> structure;
    Tensor<T> output;
  };

  explicit Generator(const GeneratorConfig& config) : config_(config) {
    config.validate();
    const int f = config.base_filters;
    const bool bias = config.norm == NormKind::None;
    const PadMode pad = config.padding;

    auto block = [&](const std::string& name, auto make_conv, int channels) {
      auto& seq = main_.template add<Sequential<T>>(name);
      make_conv(seq);
      if (config.norm != NormKind::None) seq.template add<Norm<T>>("norm", config.norm, channels);
      seq.template add<LeakyRelu<T>>("relu", 0.0);
    };

    block("stem", [&](Sequential<T>& s) {
      s.template add<Conv2d<T>>("conv", config.in_channels, f, 7, 1, 3, pad, bias);
    }, f);
    block("down1", [&](Sequential<T>& s) {
      s.template add<Conv2d<T>>("conv", f, 2 * f, 3, 2, 1, pad, bias);
    }, 2 * f);
    block("down2", [&](Sequential<T>& s) {
      s.template add<Conv2d<T>>("conv", 2 * f, 4 * f, 3, 2, 1, pad, bias);
    }, 4 * f);
    for (int r = 0; r < config.n_res_blocks; ++r) {
      Sequential<T> body;
      body.template add<Conv2d<T>>("conv1", 4 * f, 4 * f, 3, 1, 1, pad, bias);
      if (config.norm != NormKind::None) body.template add<Norm<T>>("norm1", config.norm, 4 * f);
      body.template add<LeakyRelu<T>>("relu", 0.0);
      body.template add<Conv2d<T>>("conv2", 4 * f, 4 * f, 3, 1, 1, pad, bias);
      if (config.norm != NormKind::None) body.template add<Norm<T>>("norm2", config.norm, 4 * f);
      main_.template add<Residual<T>>("res" + std::to_string(r + 1), std::move(body));
    }
    block("up1", [&](Sequential<T>& s) {
      s.template add<ConvTranspose2d<T>>("conv", 4 * f, 2 * f, bias);
    }, 2 * f);
    block("up2", [&](Sequential<T>& s) {
      s.template add<ConvTranspose2d<T>>("conv", 2 * f, f, bias);
    }, f);
    auto& out = main_.template add<Sequential<T>>("out");
    out.template add<Conv2d<T>>("conv", f, config.out_channels, 7, 1, 3, pad, true);

    if (config.structure_connection) {
      structure_ = std::make_unique<Conv2d<T>>(config.in_channels, config.out_channels, 7, 1, 3,
                                               pad, true);
    }
  }

  Generator(Generator&&) noexcept = default;
  Generator& operator=(Generator&&) noexcept = default;

  const GeneratorConfig& config() const { return config_; }

  /// tanh(main(x) + structure(x)); records a trace when one is given.
  Tensor<T> forward(const Tensor<T>& x, Mode mode, Trace* trace = nullptr) {
    check_input(x.shape());
    Tensor<T> z = main_.forward(x, mode, trace ? &trace->main : nullptr);
    if (structure_) z += structure_->forward(x, mode, trace ? &trace->structure : nullptr);
    squash(z);
    if (trace) trace->output = z;
    return z;
  }

  /// Eval-mode forward without side effects.
  Tensor<T> infer(const Tensor<T>& x) const {
    check_input(x.shape());
    Tensor<T> z = main_.infer(x);
    if (structure_) z += structure_->infer(x);
    squash(z);
    return z;
  }

  /// Backpropagates dL/d(output) through a recorded trace; returns dL/dx.
  Tensor<T> backward(const Tensor<T>& dout, const Trace& trace, bool param_grads = true) {
    Tensor<T> dz(dout.shape());
    for (std::size_t i = 0; i < dz.size(); ++i) {
      const T y = trace.output[i];
      dz[i] = dout[i] * (T{1} - y * y);
    }
    Tensor<T> dx = main_.backward(dz, trace.main, param_grads);
    if (structure_) dx += structure_->backward(dz, trace.structure, param_grads);
    return dx;
  }

  StateView<T> state() {
    StateView<T> view;
    main_.collect("main", view);
    if (structure_) structure_->collect("structure", view);
    return view;
  }

  void initialize(std::mt19937_64& rng, double stddev) {
    main_.initialize(rng, stddev);
    if (structure_) structure_->initialize(rng, stddev);
  }

 private:
  void check_input(const Shape& s) const {
    if (s.c != config_.in_channels) {
      throw ShapeError("generator expects " + std::to_string(config_.in_channels) +
                       " input channels, got " + std::to_string(s.c));
    }
    if (s.h % 4 != 0 || s.w % 4 != 0 || s.h < 4 || s.w < 4) {
      throw ShapeError("generator input height and width must be positive multiples of 4, got " +
                       std::to_string(s.h) + "x" + std::to_string(s.w));
    }
  }

  static void squash(Tensor<T>& z) {
    for (auto& v : z.values()) v = std::tanh(v);
  }

  GeneratorConfig config_;
  Sequential<T> main_;
  std::unique_ptr<Conv2d<T>> structure_;
};

/// Builds a generator with N(0, 0.02^2) convolution weights, zero biases and
/// unit normalization scales.
template <typename T>
Generator<T> build_generator(const GeneratorConfig& config, std::mt19937_64& rng,
                             double init_std = 0.02) {
  Generator<T> g(config);
  g.initialize(rng, init_std);
  return g;
}

/// Translates one normalized image in eval mode.
template <typename T>
GrayImage translate(const Generator<T>& gen, const GrayImage& x) {
  x.require(ValueRange::Normalized, "translate");
  return from_tensor(gen.infer(to_tensor<T>(x)));
}

/// Translates one normalized image in the given mode; train mode updates
/// batch-norm running statistics.
template <typename T>
GrayImage translate(Generator<T>& gen, const GrayImage& x, Mode mode) {
  x.require(ValueRange::Normalized, "translate");
  if (mode == Mode::Eval) return translate(static_cast<const Generator<T>&>(gen), x);
  return from_tensor(gen.forward(to_tensor<T>(x), mode));
}

}  // namespace thermvis
