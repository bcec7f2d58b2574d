#pragma once

// Shared fixtures and independent reference implementations for the tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "thermvis/thermvis.hpp"

namespace thermvis::support {

// ---------------------------------------------------------------------------
// Finite differences

struct FdStats {
  int checked = 0;
  int passed = 0;
  double worst = 0;
  std::string worst_name;

  double pass_rate() const { return checked ? static_cast<double>(passed) / checked : 1.0; }
  void merge(const FdStats& o) {
    checked += o.checked;
    passed += o.passed;
    if (o.worst > worst) {
      worst = o.worst;
      worst_name = o.worst_name;
    }
  }
};

/// |a - n| / max(|a|, |n|, floor)
inline double rel_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Compares `analytic[i]` with central differences of `loss` in `values[i]`
/// for up to `per_array` sampled coordinates.
inline FdStats check_array(const std::string& name, Tensor<double>& values,
                           const Tensor<double>& analytic, const std::function<double()>& loss,
                           int per_array, double step, double rtol, std::mt19937_64& rng) {
  FdStats st;
  std::vector<std::size_t> idx(values.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::shuffle(idx.begin(), idx.end(), rng);
  if (per_array > 0 && idx.size() > static_cast<std::size_t>(per_array)) idx.resize(per_array);
  for (std::size_t i : idx) {
    const double orig = values[i];
    values[i] = orig + step;
    const double up = loss();
    values[i] = orig - step;
    const double down = loss();
    values[i] = orig;
    const double numeric = (up - down) / (2 * step);
    const double e = rel_error(analytic[i], numeric);
    ++st.checked;
    if (e <= rtol) ++st.passed;
    if (e > st.worst) {
      st.worst = e;
      st.worst_name = name + "[" + std::to_string(i) + "]";
    }
  }
  return st;
}

/// Parameter gradients must already hold the analytic gradient of `loss`.
inline FdStats check_params(const std::vector<std::pair<std::string, Param<double>*>>& params,
                            const std::function<double()>& loss, int per_array, double step,
                            double rtol, std::uint64_t seed = 7) {
  std::mt19937_64 rng(seed);
  FdStats total;
  for (const auto& [name, p] : params) {
    const Tensor<double> analytic = p->grad;
    total.merge(check_array(name, p->value, analytic, loss, per_array, step, rtol, rng));
  }
  return total;
}

inline std::vector<std::pair<std::string, Param<double>*>> params_of(StateView<double> view,
                                                                     const std::string& prefix) {
  std::vector<std::pair<std::string, Param<double>*>> out;
  for (auto& [n, p] : view.params) out.emplace_back(prefix + "." + n, p);
  return out;
}

template <typename T>
void clear_grads(StateView<T> view) {
  for (auto& [n, p] : view.params) p->grad.zero();
}

template <typename T>
Tensor<T> random_tensor(Shape s, std::mt19937_64& rng, double lo = -1, double hi = 1) {
  Tensor<T> t(s);
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& v : t.values()) v = static_cast<T>(u(rng));
  return t;
}

// ---------------------------------------------------------------------------
// Micro networks

/// 8x8-capable networks: base_filters 4, one residual block, two-layer critics.
inline TrainConfig micro_config(NormKind norm = NormKind::Batch) {
  TrainConfig c;
  c.norm = norm;
  c.crop_size = 8;
  c.batch_size = 2;
  c.generator.base_filters = 4;
  c.generator.n_res_blocks = 1;
  c.discriminator.channel_plan = {{4, 2}, {8, 2}};
  c.roi.out_size = 8;
  c.init_std = 0.3;
  return c;
}

/// Generator-side micro objective in 64-bit precision.
struct MicroProblem {
  TrainConfig cfg;
  MappingPair<double> nets;
  DiscriminatorSet<double> discs;
  DomainBatch<double> x, y;

  static MicroProblem make(std::uint64_t seed, NormKind norm = NormKind::Batch) {
    TrainConfig cfg = micro_config(norm);
    cfg.seed = seed;
    auto s = TrainState<double>::create(cfg);
    std::mt19937_64 rng(seed + 1);
    DomainBatch<double> x{random_tensor<double>({2, 1, 8, 8}, rng), {{{1, 1, 4, 5}}, {{2, 0, 6, 6}, {0, 3, 3, 4}}}, Domain::IR};
    DomainBatch<double> y{random_tensor<double>({2, 1, 8, 8}, rng), {{{3, 2, 5, 5}}, {{0, 0, 8, 8}}}, Domain::VI};
    return MicroProblem{cfg, std::move(s.nets), std::move(s.discs), std::move(x), std::move(y)};
  }

  ObjectiveOptions options(bool backprop) const {
    ObjectiveOptions o;
    o.roi = cfg.roi;
    o.mode = Mode::Train;
    o.backprop = backprop;
    return o;
  }

  double value(const TermCoefficients& k) {
    return generator_objective(nets, discs, x, y, k, options(false)).report.total_g;
  }

  void backprop(const TermCoefficients& k) {
    clear_grads(nets.g.state());
    clear_grads(nets.f.state());
    generator_objective(nets, discs, x, y, k, options(true));
  }

  std::vector<std::pair<std::string, Param<double>*>> generator_params() {
    auto p = params_of(nets.g.state(), "G");
    auto q = params_of(nets.f.state(), "F");
    p.insert(p.end(), q.begin(), q.end());
    return p;
  }
};

// ---------------------------------------------------------------------------
// Reference oracles

/// Exhaustive matcher: enumerates every injective assignment of detections
/// (in stable descending-score order) to ground truths with IoU >= threshold
/// and keeps the assignment whose per-detection key sequence
/// (matched, IoU, -gt index) is lexicographically largest.
inline std::vector<bool> brute_force_match(const std::vector<Detection>& dets,
                                           const std::vector<BBox>& gts, double thr = 0.5) {
  std::vector<std::size_t> order(dets.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  using Key = std::tuple<int, double, int>;
  std::vector<Key> best_keys;
  std::vector<int> best_assign;
  std::vector<int> assign(dets.size(), -1);
  std::vector<bool> used(gts.size(), false);
  std::vector<Key> keys;
  bool have_best = false;
  std::function<void(std::size_t)> rec = [&](std::size_t k) {
    if (k == order.size()) {
      if (!have_best || keys > best_keys) {
        have_best = true;
        best_keys = keys;
        best_assign = assign;
      }
      return;
    }
    const std::size_t d = order[k];
    keys.emplace_back(0, 0.0, 0);
    assign[d] = -1;
    rec(k + 1);
    keys.pop_back();
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (used[g]) continue;
      const double v = iou(dets[d].box, gts[g]);
      if (v < thr) continue;
      used[g] = true;
      assign[d] = static_cast<int>(g);
      keys.emplace_back(1, v, -static_cast<int>(g));
      rec(k + 1);
      keys.pop_back();
      assign[d] = -1;
      used[g] = false;
    }
  };
  rec(0);
  std::vector<bool> tp(dets.size(), false);
  for (std::size_t i = 0; i < best_assign.size(); ++i) tp[i] = best_assign[i] >= 0;
  return tp;
}

struct Scene {
  std::vector<Detection> dets;
  std::vector<BBox> gts;
};

/// AP from scratch: every distinct score is a cutoff, each cutoff is matched
/// again with the exhaustive matcher, and the area is integrated over the
/// sorted distinct recall levels with p_interp(r) = max{P_k : R_k >= r}.
inline double reference_ap(const std::vector<Scene>& scenes) {
  int n_gt = 0;
  std::vector<double> cutoffs;
  for (const auto& s : scenes) {
    n_gt += static_cast<int>(s.gts.size());
    for (const auto& d : s.dets) cutoffs.push_back(d.score);
  }
  if (n_gt == 0) return cutoffs.empty() ? 1.0 : 0.0;
  std::sort(cutoffs.begin(), cutoffs.end());
  cutoffs.erase(std::unique(cutoffs.begin(), cutoffs.end()), cutoffs.end());
  std::vector<std::pair<double, double>> rp;
  for (double c : cutoffs) {
    int tp = 0, kept = 0;
    for (const auto& s : scenes) {
      std::vector<Detection> sub;
      for (const auto& d : s.dets) {
        if (d.score >= c) sub.push_back(d);
      }
      kept += static_cast<int>(sub.size());
      for (bool f : brute_force_match(sub, s.gts)) tp += f ? 1 : 0;
    }
    rp.emplace_back(static_cast<double>(tp) / n_gt, static_cast<double>(tp) / kept);
  }
  std::vector<double> levels;
  for (const auto& [r, p] : rp) levels.push_back(r);
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  double area = 0, prev = 0;
  for (double r : levels) {
    double pmax = 0;
    for (const auto& [rk, pk] : rp) {
      if (rk >= r) pmax = std::max(pmax, pk);
    }
    area += (r - prev) * pmax;
    prev = r;
  }
  return area;
}

inline Scene random_scene(std::mt19937_64& rng, int max_dets = 6, int max_gts = 4) {
  std::uniform_int_distribution<int> nd(0, max_dets), ng(0, max_gts), pos(0, 12), ext(2, 8);
  std::uniform_int_distribution<int> score_level(0, 5);
  Scene s;
  const int g = ng(rng);
  for (int i = 0; i < g; ++i) s.gts.push_back({pos(rng), pos(rng), ext(rng), ext(rng)});
  const int d = nd(rng);
  std::bernoulli_distribution near(0.6);
  std::uniform_int_distribution<int> jitter(-1, 1);
  for (int i = 0; i < d; ++i) {
    BBox b{pos(rng), pos(rng), ext(rng), ext(rng)};
    if (!s.gts.empty() && near(rng)) {
      std::uniform_int_distribution<std::size_t> pick(0, s.gts.size() - 1);
      const BBox& t = s.gts[pick(rng)];
      b = {t.x + jitter(rng), t.y + jitter(rng), std::max(1, t.w + jitter(rng)),
           std::max(1, t.h + jitter(rng))};
    }
    // coarse score levels produce ties on purpose
    s.dets.push_back({b, score_level(rng) / 5.0, "img"});
  }
  return s;
}

/// Crop the box out first, then resample the crop with half-pixel centres.
inline std::vector<double> reference_bilinear(const Tensor<double>& img, int n, const BBox& b, int out) {
  std::vector<double> crop(static_cast<std::size_t>(b.w) * b.h);
  for (int y = 0; y < b.h; ++y) {
    for (int x = 0; x < b.w; ++x) crop[static_cast<std::size_t>(y) * b.w + x] = img.at(n, 0, b.y + y, b.x + x);
  }
  auto px = [&](int y, int x) { return crop[static_cast<std::size_t>(y) * b.w + x]; };
  std::vector<double> res(static_cast<std::size_t>(out) * out);
  for (int i = 0; i < out; ++i) {
    const double sy = std::clamp((i + 0.5) * b.h / out - 0.5, 0.0, b.h - 1.0);
    const int y0 = static_cast<int>(sy);
    const int y1 = std::min(y0 + 1, b.h - 1);
    const double fy = sy - y0;
    for (int j = 0; j < out; ++j) {
      const double sx = std::clamp((j + 0.5) * b.w / out - 0.5, 0.0, b.w - 1.0);
      const int x0 = static_cast<int>(sx);
      const int x1 = std::min(x0 + 1, b.w - 1);
      const double fx = sx - x0;
      res[static_cast<std::size_t>(i) * out + j] =
          (1 - fy) * (1 - fx) * px(y0, x0) + (1 - fy) * fx * px(y0, x1) + fy * (1 - fx) * px(y1, x0) +
          fy * fx * px(y1, x1);
    }
  }
  return res;
}

/// Max over bins [floor(i*len/out), ceil((i+1)*len/out)) of the crop.
inline std::vector<double> reference_max_bins(const Tensor<double>& img, int n, const BBox& b, int out) {
  std::vector<double> res(static_cast<std::size_t>(out) * out);
  for (int i = 0; i < out; ++i) {
    const int y0 = static_cast<int>(std::floor(static_cast<double>(i) * b.h / out));
    const int y1 = std::max(y0 + 1, static_cast<int>(std::ceil(static_cast<double>(i + 1) * b.h / out)));
    for (int j = 0; j < out; ++j) {
      const int x0 = static_cast<int>(std::floor(static_cast<double>(j) * b.w / out));
      const int x1 = std::max(x0 + 1, static_cast<int>(std::ceil(static_cast<double>(j + 1) * b.w / out)));
      double m = -std::numeric_limits<double>::infinity();
      for (int y = y0; y < std::min(y1, b.h); ++y) {
        for (int x = x0; x < std::min(x1, b.w); ++x) m = std::max(m, img.at(n, 0, b.y + y, b.x + x));
      }
      res[static_cast<std::size_t>(i) * out + j] = m;
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Structure metric

/// Sobel gradient magnitude; border pixels are zero.
inline std::vector<double> sobel_magnitude(const GrayImage& g) {
  const int h = g.height(), w = g.width();
  std::vector<double> m(static_cast<std::size_t>(h) * w, 0.0);
  for (int y = 1; y + 1 < h; ++y) {
    for (int x = 1; x + 1 < w; ++x) {
      const double gx = g.at(y - 1, x + 1) + 2 * g.at(y, x + 1) + g.at(y + 1, x + 1) - g.at(y - 1, x - 1) -
                        2 * g.at(y, x - 1) - g.at(y + 1, x - 1);
      const double gy = g.at(y + 1, x - 1) + 2 * g.at(y + 1, x) + g.at(y + 1, x + 1) - g.at(y - 1, x - 1) -
                        2 * g.at(y - 1, x) - g.at(y - 1, x + 1);
      m[static_cast<std::size_t>(y) * w + x] = std::hypot(gx, gy);
    }
  }
  return m;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ma += a[i], mb += b[i];
  ma /= n, mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return saa > 0 && sbb > 0 ? sab / std::sqrt(saa * sbb) : 0.0;
}

// ---------------------------------------------------------------------------
// Synthetic sets

inline std::vector<Sample> synth_set(Domain d, int count, std::uint64_t seed, const SceneSpec& spec = {}) {
  return synthesize_set(d, count, seed, spec);
}

inline std::vector<EvaluationInput> evaluation_inputs(const std::vector<Sample>& samples) {
  std::vector<EvaluationInput> out;
  for (const auto& s : samples) {
    out.push_back({s.id, s.domain == Domain::IR ? histogram_equalize(s.image) : s.image, s.boxes});
  }
  return out;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("thermvis_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace thermvis::support
