#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "thermvis/discriminator.hpp"
#include "thermvis/error.hpp"
#include "thermvis/generator.hpp"
#include "thermvis/roi.hpp"

namespace thermvis {

inline constexpr double kProbEps = 1e-7;

struct LossWeights {
  double lambda_cyc = 5.0;
  double lambda_roi = 0.1;

  void validate() const {
    if (!(lambda_cyc >= 0) || !(lambda_roi >= 0)) {
      throw ContractError("loss weights must be non-negative");
    }
  }
};

enum class AdversarialKind { Log, LeastSquares };

inline AdversarialKind parse_adversarial(const std::string& s) {
  if (s == "log") return AdversarialKind::Log;
  if (s == "least_squares") return AdversarialKind::LeastSquares;
  throw ConfigError("unknown adversarial loss '" + s + "' (expected log|least_squares)");
}

inline const char* to_string(AdversarialKind k) {
  return k == AdversarialKind::Log ? "log" : "least_squares";
}

/// Multipliers applied to each generator-side term.
struct TermCoefficients {
  double adv_g_vi = 0;
  double adv_g_ir = 0;
  double cyc = 0;
  double roi_cyc = 0;
  double roi_adv_vi = 0;
  double roi_adv_ir = 0;

  /// adv + adv + l_cyc * L_cyc + l_roi * (l_cyc * L_roi_cyc + roi_adv + roi_adv)
  static TermCoefficients from(const LossWeights& w) {
    w.validate();
    return {1.0, 1.0, w.lambda_cyc, w.lambda_roi * w.lambda_cyc, w.lambda_roi, w.lambda_roi};
  }
};

/// Per-term scalars of one objective evaluation.
struct LossReport {
  double cyc = 0;
  double adv_g_vi = 0;
  double adv_g_ir = 0;
  double roi_cyc = 0;
  double roi_adv_vi = 0;
  double roi_adv_ir = 0;
  double total_g = 0;
  double total_d = 0;

  double weighted_total(const TermCoefficients& k) const {
    return k.adv_g_vi * adv_g_vi + k.adv_g_ir * adv_g_ir + k.cyc * cyc + k.roi_cyc * roi_cyc +
           k.roi_adv_vi * roi_adv_vi + k.roi_adv_ir * roi_adv_ir;
  }

  static constexpr const char* kColumns[] = {"cyc",        "adv_g_VI",   "adv_g_IR",
                                             "roi_cyc",    "roi_adv_VI", "roi_adv_IR",
                                             "total_G",    "total_D"};

  std::vector<double> values() const {
    return {cyc, adv_g_vi, adv_g_ir, roi_cyc, roi_adv_vi, roi_adv_ir, total_g, total_d};
  }
};

/// Images of one domain with their per-element boxes.
template <typename T>
struct DomainBatch {
  Tensor<T> images;
  std::vector<std::vector<BBox>> boxes;
  Domain domain = Domain::IR;
};

// ---------------------------------------------------------------------------
// Primitive terms on logits.

namespace detail {

inline double log_sigmoid(double l) {
  return l >= 0 ? -std::log1p(std::exp(-l)) : l - std::log1p(std::exp(l));
}
inline double sigmoid(double l) {
  return l >= 0 ? 1.0 / (1.0 + std::exp(-l)) : std::exp(l) / (1.0 + std::exp(l));
}

/// log(clamp(sigmoid(l), eps, 1 - eps)) and its derivative w.r.t. l.
inline std::pair<double, double> clamped_log_prob(double l) {
  const double lo = std::log(kProbEps);
  const double hi = std::log1p(-kProbEps);
  const double v = log_sigmoid(l);
  if (v <= lo) return {lo, 0.0};
  if (v >= hi) return {hi, 0.0};
  return {v, 1.0 - sigmoid(l)};
}

template <typename T>
void require_cells_match(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.c() != b.c() || a.h() != b.h() || a.w() != b.w()) {
    throw ShapeError("score map shape mismatch: " + a.shape().str() + " vs " + b.shape().str());
  }
}

template <typename T>
std::vector<double> uniform_weights(const Tensor<T>& t) {
  return std::vector<double>(static_cast<std::size_t>(t.n()), t.n() ? 1.0 / t.n() : 0.0);
}

/// Per-sample weights for pooled patches: each element's boxes share 1/N.
template <typename T>
std::vector<double> patch_weights(const RoiPooled<T>& pooled, int batch) {
  std::vector<int> count(static_cast<std::size_t>(batch), 0);
  for (int o : pooled.owner) ++count[static_cast<std::size_t>(o)];
  std::vector<double> w;
  w.reserve(pooled.owner.size());
  for (int o : pooled.owner) w.push_back(1.0 / (batch * count[static_cast<std::size_t>(o)]));
  return w;
}

/// Weighted mean of per-cell values f(logit); writes d/dlogit into grad.
template <typename T, typename Fn>
double weighted_cell_mean(const Tensor<T>& logits, std::span<const double> weights, Fn fn,
                          Tensor<T>* grad) {
  if (grad) *grad = Tensor<T>(logits.shape());
  const std::size_t cells = static_cast<std::size_t>(logits.c()) * logits.shape().plane();
  double total = 0;
  for (int n = 0; n < logits.n(); ++n) {
    const double wn = weights[static_cast<std::size_t>(n)] / static_cast<double>(cells);
    const T* l = logits.sample(n);
    for (std::size_t i = 0; i < cells; ++i) {
      const auto [v, d] = fn(static_cast<double>(l[i]));
      total += wn * v;
      if (grad) grad->sample(n)[i] = static_cast<T>(wn * d);
    }
  }
  return total;
}

}  // namespace detail

/// Value with the gradient w.r.t. its (first) input.
template <typename T>
struct TermGrad {
  double value = 0;
  Tensor<T> grad;
};

template <typename T>
struct DiscriminatorTerm {
  double value = 0;
  Tensor<T> grad_real;
  Tensor<T> grad_fake;
};

/// E[log D(real)] + E[log(1 - D(fake))] with probabilities clamped to [eps, 1-eps].
inline double adversarial_value_from_probs(std::span<const double> real_probs,
                                           std::span<const double> fake_probs) {
  auto mean_log = [](std::span<const double> ps, bool complement) {
    if (ps.empty()) return 0.0;
    double s = 0;
    for (double p : ps) {
      const double q = std::clamp(complement ? 1.0 - p : p, kProbEps, 1.0 - kProbEps);
      s += std::log(q);
    }
    return s / static_cast<double>(ps.size());
  };
  return mean_log(real_probs, false) + mean_log(fake_probs, true);
}

/// E[log D(real)] + E[log(1 - D(fake))] over logit score maps (means over cells).
template <typename T>
double adversarial_value(const Tensor<T>& real_logits, const Tensor<T>& fake_logits,
                         std::span<const double> real_weights = {},
                         std::span<const double> fake_weights = {}) {
  detail::require_cells_match(real_logits, fake_logits);
  const auto rw = real_weights.empty() ? detail::uniform_weights(real_logits)
                                       : std::vector<double>(real_weights.begin(), real_weights.end());
  const auto fw = fake_weights.empty() ? detail::uniform_weights(fake_logits)
                                       : std::vector<double>(fake_weights.begin(), fake_weights.end());
  const double real = detail::weighted_cell_mean<T>(real_logits, rw, detail::clamped_log_prob, nullptr);
  const double fake = detail::weighted_cell_mean<T>(
      fake_logits, fw, [](double l) { return detail::clamped_log_prob(-l); }, nullptr);
  return real + fake;
}

/// Discriminator loss: the negated adversarial value (log form) or
/// E[(D(real) - 1)^2] + E[D(fake)^2] (least squares).
template <typename T>
DiscriminatorTerm<T> adversarial_loss_d(const Tensor<T>& real_logits, const Tensor<T>& fake_logits,
                                        AdversarialKind kind = AdversarialKind::Log,
                                        std::span<const double> real_weights = {},
                                        std::span<const double> fake_weights = {}) {
  detail::require_cells_match(real_logits, fake_logits);
  const auto rw = real_weights.empty() ? detail::uniform_weights(real_logits)
                                       : std::vector<double>(real_weights.begin(), real_weights.end());
  const auto fw = fake_weights.empty() ? detail::uniform_weights(fake_logits)
                                       : std::vector<double>(fake_weights.begin(), fake_weights.end());
  DiscriminatorTerm<T> out;
  if (kind == AdversarialKind::Log) {
    const double real = detail::weighted_cell_mean<T>(
        real_logits, rw,
        [](double l) {
          auto [v, d] = detail::clamped_log_prob(l);
          return std::pair{-v, -d};
        },
        &out.grad_real);
    const double fake = detail::weighted_cell_mean<T>(
        fake_logits, fw,
        [](double l) {
          auto [v, d] = detail::clamped_log_prob(-l);
          return std::pair{-v, d};
        },
        &out.grad_fake);
    out.value = real + fake;
  } else {
    const double real = detail::weighted_cell_mean<T>(
        real_logits, rw, [](double l) { return std::pair{(l - 1) * (l - 1), 2 * (l - 1)}; },
        &out.grad_real);
    const double fake = detail::weighted_cell_mean<T>(
        fake_logits, fw, [](double l) { return std::pair{l * l, 2 * l}; }, &out.grad_fake);
    out.value = real + fake;
  }
  return out;
}

/// Non-saturating generator loss -E[log D(fake)], or E[(D(fake) - 1)^2].
template <typename T>
TermGrad<T> adversarial_loss_g(const Tensor<T>& fake_logits,
                               AdversarialKind kind = AdversarialKind::Log,
                               std::span<const double> weights = {}) {
  const auto w = weights.empty() ? detail::uniform_weights(fake_logits)
                                 : std::vector<double>(weights.begin(), weights.end());
  TermGrad<T> out;
  if (kind == AdversarialKind::Log) {
    out.value = detail::weighted_cell_mean<T>(
        fake_logits, w,
        [](double l) {
          auto [v, d] = detail::clamped_log_prob(l);
          return std::pair{-v, -d};
        },
        &out.grad);
  } else {
    out.value = detail::weighted_cell_mean<T>(
        fake_logits, w, [](double l) { return std::pair{(l - 1) * (l - 1), 2 * (l - 1)}; },
        &out.grad);
  }
  return out;
}

/// Weighted mean absolute difference; gradient w.r.t. `a`.
template <typename T>
TermGrad<T> l1_loss(const Tensor<T>& a, const Tensor<T>& b, std::span<const double> weights = {}) {
  if (!(a.shape() == b.shape())) {
    throw ShapeError("l1_loss shape mismatch: " + a.shape().str() + " vs " + b.shape().str());
  }
  const auto w = weights.empty() ? detail::uniform_weights(a)
                                 : std::vector<double>(weights.begin(), weights.end());
  TermGrad<T> out{0.0, Tensor<T>(a.shape())};
  const std::size_t cells = static_cast<std::size_t>(a.c()) * a.shape().plane();
  for (int n = 0; n < a.n(); ++n) {
    const double wn = w[static_cast<std::size_t>(n)] / static_cast<double>(cells);
    const T* pa = a.sample(n);
    const T* pb = b.sample(n);
    T* g = out.grad.sample(n);
    for (std::size_t i = 0; i < cells; ++i) {
      const double d = static_cast<double>(pa[i]) - static_cast<double>(pb[i]);
      out.value += wn * std::abs(d);
      g[i] = static_cast<T>(d > 0 ? wn : (d < 0 ? -wn : 0.0));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Terms over arbitrary mappings (callables Tensor -> Tensor).

namespace detail {

template <typename T>
void require_domains(const DomainBatch<T>& x, const DomainBatch<T>& y) {
  if (x.domain != Domain::IR || y.domain != Domain::VI) {
    throw ContractError("expected an IR batch and a VI batch");
  }
}

template <typename T>
void require_boxes(const DomainBatch<T>& b) {
  if (static_cast<int>(b.boxes.size()) != b.images.n()) {
    throw ContractError("batch needs one box list per element");
  }
  for (const auto& bx : b.boxes) {
    if (bx.empty()) throw ContractError("ROI loss needs at least one box per element");
  }
}

}  // namespace detail

/// mean|F(G(x)) - x| + mean|G(F(y)) - y|
template <typename T, typename MapG, typename MapF>
double cycle_loss(MapG&& g, MapF&& f, const DomainBatch<T>& x, const DomainBatch<T>& y) {
  detail::require_domains(x, y);
  return l1_loss<T>(f(g(x.images)), x.images).value + l1_loss<T>(g(f(y.images)), y.images).value;
}

/// mean|R(F(G(x))) - R(x)| + mean|R(G(F(y))) - R(y)|, R using each source's own boxes.
template <typename T, typename MapG, typename MapF>
double roi_cycle_loss(MapG&& g, MapF&& f, const DomainBatch<T>& x, const DomainBatch<T>& y,
                      const RoiPoolSpec& spec) {
  detail::require_domains(x, y);
  detail::require_boxes(x);
  detail::require_boxes(y);
  auto side = [&](const Tensor<T>& rec, const DomainBatch<T>& src) {
    const auto pr = roi_pool<T>(rec, src.boxes, spec);
    const auto ps = roi_pool<T>(src.images, src.boxes, spec);
    const auto w = detail::patch_weights(pr, src.images.n());
    return l1_loss<T>(pr.patches, ps.patches, w).value;
  };
  return side(f(g(x.images)), x) + side(g(f(y.images)), y);
}

/// E[log D(R(real))] + E[log(1 - D(R(fake)))]; `fake_boxes` are the source
/// element's boxes applied to the translated image.
template <typename T, typename Disc>
double roi_adversarial_value(Disc&& d, const DomainBatch<T>& real, const Tensor<T>& fake,
                             const std::vector<std::vector<BBox>>& fake_boxes,
                             const RoiPoolSpec& spec) {
  const auto pr = roi_pool<T>(real.images, real.boxes, spec);
  const auto pf = roi_pool<T>(fake, fake_boxes, spec);
  return adversarial_value<T>(d(pr.patches), d(pf.patches),
                              detail::patch_weights(pr, real.images.n()),
                              detail::patch_weights(pf, fake.n()));
}

/// Discriminator-side ROI loss value (negated value in log form).
template <typename T, typename Disc>
double roi_adversarial_loss_d(Disc&& d, const DomainBatch<T>& real, const Tensor<T>& fake,
                              const std::vector<std::vector<BBox>>& fake_boxes,
                              const RoiPoolSpec& spec, AdversarialKind kind = AdversarialKind::Log) {
  const auto pr = roi_pool<T>(real.images, real.boxes, spec);
  const auto pf = roi_pool<T>(fake, fake_boxes, spec);
  return adversarial_loss_d<T>(d(pr.patches), d(pf.patches), kind,
                               detail::patch_weights(pr, real.images.n()),
                               detail::patch_weights(pf, fake.n()))
      .value;
}

/// Generator-side ROI loss value.
template <typename T, typename Disc>
double roi_adversarial_loss_g(Disc&& d, const Tensor<T>& fake,
                              const std::vector<std::vector<BBox>>& fake_boxes,
                              const RoiPoolSpec& spec, AdversarialKind kind = AdversarialKind::Log) {
  const auto pf = roi_pool<T>(fake, fake_boxes, spec);
  return adversarial_loss_g<T>(d(pf.patches), kind, detail::patch_weights(pf, fake.n())).value;
}

// ---------------------------------------------------------------------------
// The six networks and the full objective.

/// G: IR -> VI and F: VI -> IR.
template <typename T>
struct MappingPair {
  Generator<T> g;
  Generator<T> f;
};

/// Global and ROI critics for each domain.
template <typename T>
struct DiscriminatorSet {
  Discriminator<T> global_vi;
  Discriminator<T> global_ir;
  Discriminator<T> roi_vi;
  Discriminator<T> roi_ir;
};

struct ObjectiveOptions {
  RoiPoolSpec roi{};
  AdversarialKind adversarial = AdversarialKind::Log;
  Mode mode = Mode::Train;
  bool backprop = true;
  /// Also accumulate d(total_G)/d(theta) into discriminator parameter grads.
  bool discriminator_grads = false;
};

/// Generator-side evaluation: report plus the translated batches.
template <typename T>
struct GeneratorPass {
  LossReport report;
  Tensor<T> fake_vi;  ///< G(x)
  Tensor<T> fake_ir;  ///< F(y)
};

/// Evaluates every generator-side term and total_G = sum(coefficient * term).
///
/// With `backprop`, adds d(total_G)/d(theta) into the parameter gradients of
/// G and F (callers zero them first). Discriminators only pass gradients
/// through unless `discriminator_grads` is set.
template <typename T>
GeneratorPass<T> generator_objective(MappingPair<T>& nets, DiscriminatorSet<T>& discs,
                                     const DomainBatch<T>& x, const DomainBatch<T>& y,
                                     const TermCoefficients& k, const ObjectiveOptions& opt = {}) {
  detail::require_domains(x, y);
  detail::require_boxes(x);
  detail::require_boxes(y);
  const bool bp = opt.backprop;
  const bool dgrads = opt.discriminator_grads;
  using GTrace = typename Generator<T>::Trace;
  GTrace tg_x, tf_fy, tf_y, tg_fx;

  GeneratorPass<T> out;
  LossReport& r = out.report;
  out.fake_vi = nets.g.forward(x.images, opt.mode, bp ? &tg_x : nullptr);
  const Tensor<T> rec_x = nets.f.forward(out.fake_vi, opt.mode, bp ? &tf_fy : nullptr);
  out.fake_ir = nets.f.forward(y.images, opt.mode, bp ? &tf_y : nullptr);
  const Tensor<T> rec_y = nets.g.forward(out.fake_ir, opt.mode, bp ? &tg_fx : nullptr);

  Tensor<T> d_fake_vi(out.fake_vi.shape());
  Tensor<T> d_fake_ir(out.fake_ir.shape());
  Tensor<T> d_rec_x(rec_x.shape());
  Tensor<T> d_rec_y(rec_y.shape());

  auto scaled = [](Tensor<T> t, double s) {
    t *= static_cast<T>(s);
    return t;
  };

  // Adversarial terms through a critic: accumulate d/d(input) into `dst`.
  auto critic_term = [&](Discriminator<T>& d, const Tensor<T>& input, std::span<const double> w,
                         double coef, Tensor<T>& dinput) {
    typename Discriminator<T>::Trace trace;
    const Tensor<T> logits = d.forward(input, opt.mode, bp ? &trace : nullptr);
    auto term = adversarial_loss_g<T>(logits, opt.adversarial, w);
    if (bp && (coef != 0 || dgrads)) {
      dinput = d.backward(scaled(std::move(term.grad), coef), trace, dgrads);
    } else if (bp) {
      dinput = Tensor<T>(input.shape());
    }
    return term.value;
  };

  {
    Tensor<T> dv;
    r.adv_g_vi = critic_term(discs.global_vi, out.fake_vi, {}, k.adv_g_vi, dv);
    if (bp) d_fake_vi += dv;
    Tensor<T> di;
    r.adv_g_ir = critic_term(discs.global_ir, out.fake_ir, {}, k.adv_g_ir, di);
    if (bp) d_fake_ir += di;
  }
  {
    auto cx = l1_loss<T>(rec_x, x.images);
    auto cy = l1_loss<T>(rec_y, y.images);
    r.cyc = cx.value + cy.value;
    if (bp) {
      d_rec_x += scaled(std::move(cx.grad), k.cyc);
      d_rec_y += scaled(std::move(cy.grad), k.cyc);
    }
  }
  {
    auto side = [&](const Tensor<T>& rec, const DomainBatch<T>& src, Tensor<T>& drec) {
      const auto pr = roi_pool<T>(rec, src.boxes, opt.roi);
      const auto ps = roi_pool<T>(src.images, src.boxes, opt.roi);
      auto term = l1_loss<T>(pr.patches, ps.patches, detail::patch_weights(pr, src.images.n()));
      if (bp) drec += roi_pool_backward(pr, scaled(std::move(term.grad), k.roi_cyc));
      return term.value;
    };
    r.roi_cyc = side(rec_x, x, d_rec_x) + side(rec_y, y, d_rec_y);
  }
  {
    auto side = [&](Discriminator<T>& d, const Tensor<T>& fake, const DomainBatch<T>& src,
                    double coef, Tensor<T>& dfake) {
      const auto pf = roi_pool<T>(fake, src.boxes, opt.roi);
      const auto w = detail::patch_weights(pf, fake.n());
      Tensor<T> dpatch;
      const double v = critic_term(d, pf.patches, w, coef, dpatch);
      if (bp) dfake += roi_pool_backward(pf, dpatch);
      return v;
    };
    r.roi_adv_vi = side(discs.roi_vi, out.fake_vi, x, k.roi_adv_vi, d_fake_vi);
    r.roi_adv_ir = side(discs.roi_ir, out.fake_ir, y, k.roi_adv_ir, d_fake_ir);
  }
  r.total_g = r.weighted_total(k);

  if (bp) {
    d_fake_vi += nets.f.backward(d_rec_x, tf_fy);
    nets.g.backward(d_fake_vi, tg_x);
    d_fake_ir += nets.g.backward(d_rec_y, tg_fx);
    nets.f.backward(d_fake_ir, tf_y);
  }
  return out;
}

/// Per-critic discriminator losses of one D-step.
struct DiscriminatorReport {
  double global_vi = 0;
  double global_ir = 0;
  double roi_vi = 0;
  double roi_ir = 0;

  double total() const { return global_vi + global_ir + roi_vi + roi_ir; }
};

/// Fakes shown to the critics in a D-step (all detached from the generators).
template <typename T>
struct DiscriminatorInputs {
  Tensor<T> global_fake_vi;  ///< fakes for the global VI critic (possibly replayed)
  Tensor<T> global_fake_ir;
  Tensor<T> fake_vi;  ///< current G(x), pooled with x's boxes
  Tensor<T> fake_ir;  ///< current F(y), pooled with y's boxes
};

/// Evaluates the four critic losses; with `backprop` accumulates their
/// parameter gradients.
template <typename T>
DiscriminatorReport discriminator_objective(DiscriminatorSet<T>& discs, const DomainBatch<T>& x,
                                            const DomainBatch<T>& y,
                                            const DiscriminatorInputs<T>& fakes,
                                            const ObjectiveOptions& opt = {}) {
  detail::require_domains(x, y);
  const bool bp = opt.backprop;
  auto critic = [&](Discriminator<T>& d, const Tensor<T>& real, const Tensor<T>& fake,
                    std::span<const double> wr, std::span<const double> wf) {
    typename Discriminator<T>::Trace tr, tf;
    const Tensor<T> lr = d.forward(real, opt.mode, bp ? &tr : nullptr);
    const Tensor<T> lf = d.forward(fake, opt.mode, bp ? &tf : nullptr);
    auto term = adversarial_loss_d<T>(lr, lf, opt.adversarial, wr, wf);
    if (bp) {
      d.backward(term.grad_real, tr, true);
      d.backward(term.grad_fake, tf, true);
    }
    return term.value;
  };
  DiscriminatorReport r;
  r.global_vi = critic(discs.global_vi, y.images, fakes.global_fake_vi, {}, {});
  r.global_ir = critic(discs.global_ir, x.images, fakes.global_fake_ir, {}, {});
  {
    const auto real = roi_pool<T>(y.images, y.boxes, opt.roi);
    const auto fake = roi_pool<T>(fakes.fake_vi, x.boxes, opt.roi);
    r.roi_vi = critic(discs.roi_vi, real.patches, fake.patches,
                      detail::patch_weights(real, y.images.n()),
                      detail::patch_weights(fake, fakes.fake_vi.n()));
  }
  {
    const auto real = roi_pool<T>(x.images, x.boxes, opt.roi);
    const auto fake = roi_pool<T>(fakes.fake_ir, y.boxes, opt.roi);
    r.roi_ir = critic(discs.roi_ir, real.patches, fake.patches,
                      detail::patch_weights(real, x.images.n()),
                      detail::patch_weights(fake, fakes.fake_ir.n()));
  }
  return r;
}

/// Full objective: generator-side terms from the current networks and the
/// critics' losses on the current (non-replayed) fakes. No gradients.
template <typename T>
LossReport full_objective(MappingPair<T>& nets, DiscriminatorSet<T>& discs,
                          const DomainBatch<T>& x, const DomainBatch<T>& y,
                          const LossWeights& weights, ObjectiveOptions opt = {}) {
  weights.validate();
  opt.backprop = false;
  auto pass = generator_objective(nets, discs, x, y, TermCoefficients::from(weights), opt);
  DiscriminatorInputs<T> fakes{pass.fake_vi, pass.fake_ir, pass.fake_vi, pass.fake_ir};
  pass.report.total_d = discriminator_objective(discs, x, y, fakes, opt).total();
  return pass.report;
}

}  // namespace thermvis
