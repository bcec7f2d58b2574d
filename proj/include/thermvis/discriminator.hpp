#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "thermvis/error.hpp"
#include "thermvis/layers.hpp"

namespace thermvis {

struct PlanEntry {
  int filters = 0;
  int stride = 1;

  friend bool operator==(const PlanEntry&, const PlanEntry&) = default;
};

/// PatchGAN configuration: 4x4 conv-norm-LeakyReLU layers per the plan, then a
/// 4x4 stride-1 convolution to one logit channel. All convolutions pad by 1.
struct DiscriminatorConfig {
  std::vector<PlanEntry> channel_plan{{64, 2}, {128, 2}, {256, 2}, {512, 2}, {512, 1}};
  int in_channels = 1;
  double leaky_slope = 0.2;
  NormKind norm = NormKind::Batch;

  void validate() const {
    if (channel_plan.empty()) throw ConfigError("discriminator channel plan is empty");
    for (const auto& e : channel_plan) {
      if (e.filters < 1) throw ConfigError("discriminator filters must be >= 1");
      if (e.stride != 1 && e.stride != 2) throw ConfigError("discriminator strides must be 1 or 2");
    }
    if (in_channels < 1) throw ConfigError("discriminator in_channels must be >= 1");
    if (leaky_slope < 0) throw ConfigError("leaky slope must be >= 0");
  }
};

inline constexpr int kPatchKernel = 4;
inline constexpr int kPatchPad = 1;

/// Closed-form score-map extent for an n-pixel input side (0 if too small).
inline int score_map_extent(int n, const std::vector<PlanEntry>& plan) {
  auto step = [](int m, int stride) {
    const int span = m + 2 * kPatchPad - kPatchKernel;
    return span < 0 ? 0 : span / stride + 1;
  };
  for (const auto& e : plan) {
    n = step(n, e.stride);
    if (n < 1) return 0;
  }
  return step(n, 1);
}

/// Receptive field of one output logit, in input pixels.
inline int receptive_field(const std::vector<PlanEntry>& plan) {
  int rf = kPatchKernel;  // head convolution
  for (auto it = plan.rbegin(); it != plan.rend(); ++it) {
    rf = (rf - 1) * it->stride + kPatchKernel;
  }
  return rf;
}

/// Smallest square input side that yields a non-empty score map.
inline int min_input_extent(const std::vector<PlanEntry>& plan) {
  int n = 1;
  while (score_map_extent(n, plan) < 1) ++n;
  return n;
}

template <typename T>
class Discriminator {
 public:
  using Trace = LayerCache<T>;

  explicit Discriminator(const DiscriminatorConfig& config) : config_(config) {
    config.validate();
    int in = config.in_channels;
    for (std::size_t i = 0; i < config.channel_plan.size(); ++i) {
      const auto& e = config.channel_plan[i];
      const bool normed = i > 0 && config.norm != NormKind::None;
      auto& seq = net_.template add<Sequential<T>>("layer" + std::to_string(i));
      seq.template add<Conv2d<T>>("conv", in, e.filters, kPatchKernel, e.stride, kPatchPad,
                                  PadMode::Zero, !normed);
      if (normed) seq.template add<Norm<T>>("norm", config.norm, e.filters);
      seq.template add<LeakyRelu<T>>("act", config.leaky_slope);
      in = e.filters;
    }
    auto& head = net_.template add<Sequential<T>>("head");
    head.template add<Conv2d<T>>("conv", in, 1, kPatchKernel, 1, kPatchPad, PadMode::Zero, true);
  }

  Discriminator(Discriminator&&) noexcept = default;
  Discriminator& operator=(Discriminator&&) noexcept = default;

  const DiscriminatorConfig& config() const { return config_; }

  /// Patch logits, N x 1 x h' x w'.
  Tensor<T> forward(const Tensor<T>& x, Mode mode, Trace* trace = nullptr) {
    check_input(x.shape());
    return net_.forward(x, mode, trace);
  }
  Tensor<T> infer(const Tensor<T>& x) const {
    check_input(x.shape());
    return net_.infer(x);
  }
  /// When `param_grads` is false only the input gradient is computed.
  Tensor<T> backward(const Tensor<T>& dlogits, const Trace& trace, bool param_grads = true) {
    return net_.backward(dlogits, trace, param_grads);
  }

  StateView<T> state() {
    StateView<T> view;
    net_.collect("", view);
    return view;
  }

  void initialize(std::mt19937_64& rng, double stddev) { net_.initialize(rng, stddev); }

 private:
  void check_input(const Shape& s) const {
    if (s.c != config_.in_channels) {
      throw ShapeError("discriminator expects " + std::to_string(config_.in_channels) +
                       " channels, got " + std::to_string(s.c));
    }
    const int min_side = min_input_extent(config_.channel_plan);
    if (s.h < min_side || s.w < min_side) {
      throw ShapeError("discriminator input " + std::to_string(s.h) + "x" + std::to_string(s.w) +
                       " below the minimum extent " + std::to_string(min_side));
    }
  }

  DiscriminatorConfig config_;
  Sequential<T> net_;
};

template <typename T>
Discriminator<T> build_patch_discriminator(const DiscriminatorConfig& config,
                                           std::mt19937_64& rng, double init_std = 0.02) {
  Discriminator<T> d(config);
  d.initialize(rng, init_std);
  return d;
}

/// Patch logits for one batch in the given mode (eval mode has no side effects).
template <typename T>
Tensor<T> discriminate(Discriminator<T>& d, const Tensor<T>& x, Mode mode) {
  return mode == Mode::Eval ? d.infer(x) : d.forward(x, mode);
}

}  // namespace thermvis
