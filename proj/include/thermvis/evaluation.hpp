#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "thermvis/error.hpp"
#include "thermvis/image.hpp"

namespace thermvis {

struct Detection {
  BBox box;
  double score = 0;
  std::string image_id;
};

inline double iou(const BBox& a, const BBox& b) {
  const long ix = std::max(0, std::min(a.right(), b.right()) - std::max(a.x, b.x));
  const long iy = std::max(0, std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y));
  const long inter = ix * iy;
  const long uni = a.area() + b.area() - inter;
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

inline constexpr double kDefaultIouThreshold = 0.5;

/// Greedy matching in descending score order (stable for ties). Each
/// detection takes the unmatched ground truth with the highest IoU at or
/// above the threshold (lowest index on ties). Flags are indexed like `dets`.
inline std::vector<bool> match_detections(std::span<const Detection> dets,
                                          std::span<const BBox> gts,
                                          double iou_threshold = kDefaultIouThreshold) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  std::vector<bool> taken(gts.size(), false);
  std::vector<bool> tp(dets.size(), false);
  for (std::size_t i : order) {
    double best = -1;
    std::size_t best_gt = 0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g]) continue;
      const double v = iou(dets[i].box, gts[g]);
      if (v >= iou_threshold && v > best) {
        best = v;
        best_gt = g;
      }
    }
    if (best >= 0) {
      taken[best_gt] = true;
      tp[i] = true;
    }
  }
  return tp;
}

struct PRPoint {
  double recall = 0;
  double precision = 0;
  double threshold = 0;  ///< score cutoff (detections with score >= threshold)
};

struct PRCurve {
  std::vector<PRPoint> points;  ///< recall non-decreasing
};

struct APReport {
  double ap = 0;
  int n_images = 0;
  int n_gt = 0;
  int n_detections = 0;
  int n_skipped = 0;
  PRCurve curve;
};

/// All-points interpolated area under a PR curve whose points are in cutoff order.
inline double interpolated_area(const PRCurve& curve) {
  double area = 0;
  double prev_recall = 0;
  const auto& pts = curve.points;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    double envelope = 0;
    for (std::size_t j = k; j < pts.size(); ++j) envelope = std::max(envelope, pts[j].precision);
    area += (pts[k].recall - prev_recall) * envelope;
    prev_recall = pts[k].recall;
  }
  return area;
}

struct ScoredFlag {
  double score = 0;
  bool tp = false;
};

/// PR curve over every score cutoff and its all-points AP. Tied scores form
/// one cutoff. With no ground truth AP is 1 if there are no detections, else 0.
inline APReport average_precision(std::vector<ScoredFlag> flags, int n_gt) {
  if (n_gt < 0) throw ContractError("n_gt must be >= 0");
  std::stable_sort(flags.begin(), flags.end(),
                   [](const ScoredFlag& a, const ScoredFlag& b) { return a.score > b.score; });
  APReport r;
  r.n_gt = n_gt;
  r.n_detections = static_cast<int>(flags.size());
  if (n_gt == 0) {
    r.ap = flags.empty() ? 1.0 : 0.0;
    return r;
  }
  // envelope from the back so the area is linear in the number of cutoffs
  long tp = 0;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    tp += flags[i].tp ? 1 : 0;
    const bool last_of_tie = i + 1 == flags.size() || flags[i + 1].score != flags[i].score;
    if (!last_of_tie) continue;
    r.curve.points.push_back({static_cast<double>(tp) / n_gt,
                              static_cast<double>(tp) / static_cast<double>(i + 1), flags[i].score});
  }
  double area = 0;
  double envelope = 0;
  for (std::size_t k = r.curve.points.size(); k-- > 0;) {
    envelope = std::max(envelope, r.curve.points[k].precision);
    const double prev = k == 0 ? 0.0 : r.curve.points[k - 1].recall;
    area += (r.curve.points[k].recall - prev) * envelope;
  }
  r.ap = area;
  return r;
}

/// Flags already in descending score order; every prefix is a cutoff.
inline APReport average_precision(std::span<const bool> flags_in_score_order, int n_gt) {
  std::vector<ScoredFlag> flags;
  flags.reserve(flags_in_score_order.size());
  const double n = static_cast<double>(flags_in_score_order.size());
  for (std::size_t i = 0; i < flags_in_score_order.size(); ++i) {
    flags.push_back({n - static_cast<double>(i), flags_in_score_order[i]});
  }
  return average_precision(std::move(flags), n_gt);
}

inline APReport average_precision(std::initializer_list<bool> flags, int n_gt) {
  const std::vector<bool> v(flags);
  std::vector<ScoredFlag> scored;
  for (std::size_t i = 0; i < v.size(); ++i) {
    scored.push_back({static_cast<double>(v.size() - i), v[i]});
  }
  return average_precision(std::move(scored), n_gt);
}

// ---------------------------------------------------------------------------
// Detectors

class Detector {
 public:
  virtual ~Detector() = default;
  virtual std::vector<Detection> detect(const GrayImage& img, const std::string& image_id) const = 0;
  virtual nlohmann::json describe() const = 0;
};

enum class Polarity { Dark, Bright };

struct BlobDetectorConfig {
  Polarity polarity = Polarity::Dark;
  int smooth_radius = 1;       ///< box-filter radius applied before thresholding
  int background_radius = 12;  ///< box-filter radius of the local background estimate
  double threshold = 0.12;     ///< contrast in [0,1] intensity units
  int min_area = 12;           ///< pixels
};

/// Local-contrast blob detector: box-filtered image against a wider local
/// background, thresholded, split into 4-connected components. Each
/// component yields its bounding box; the score is its mean contrast.
class BlobDetector final : public Detector {
 public:
  explicit BlobDetector(BlobDetectorConfig cfg = {}) : cfg_(cfg) {}

  const BlobDetectorConfig& config() const { return cfg_; }

  std::vector<Detection> detect(const GrayImage& img, const std::string& image_id) const override {
    const int h = img.height();
    const int w = img.width();
    std::vector<double> unit(img.size());
    const auto px = img.pixels();
    for (std::size_t i = 0; i < px.size(); ++i) {
      unit[i] = img.range() == ValueRange::UInt8 ? px[i] / 255.0 : (px[i] + 1.0) / 2.0;
    }
    const auto smooth = box_mean(unit, h, w, cfg_.smooth_radius);
    const auto background = box_mean(unit, h, w, cfg_.background_radius);
    std::vector<double> contrast(unit.size());
    for (std::size_t i = 0; i < unit.size(); ++i) {
      contrast[i] = cfg_.polarity == Polarity::Dark ? background[i] - smooth[i]
                                                    : smooth[i] - background[i];
    }

    std::vector<int> label(unit.size(), -1);
    std::vector<Detection> out;
    std::vector<int> stack;
    for (int start = 0; start < h * w; ++start) {
      if (label[static_cast<std::size_t>(start)] >= 0 ||
          contrast[static_cast<std::size_t>(start)] < cfg_.threshold) {
        continue;
      }
      int x0 = w, y0 = h, x1 = -1, y1 = -1;
      long area = 0;
      double sum = 0;
      stack.assign(1, start);
      label[static_cast<std::size_t>(start)] = start;
      while (!stack.empty()) {
        const int p = stack.back();
        stack.pop_back();
        const int y = p / w;
        const int x = p % w;
        ++area;
        sum += contrast[static_cast<std::size_t>(p)];
        x0 = std::min(x0, x), x1 = std::max(x1, x);
        y0 = std::min(y0, y), y1 = std::max(y1, y);
        const int nb[4][2] = {{y - 1, x}, {y + 1, x}, {y, x - 1}, {y, x + 1}};
        for (const auto& q : nb) {
          if (q[0] < 0 || q[0] >= h || q[1] < 0 || q[1] >= w) continue;
          const std::size_t k = static_cast<std::size_t>(q[0]) * w + q[1];
          if (label[k] < 0 && contrast[k] >= cfg_.threshold) {
            label[k] = start;
            stack.push_back(static_cast<int>(k));
          }
        }
      }
      if (area < cfg_.min_area) continue;
      const double saliency = sum / static_cast<double>(area);
      out.push_back({BBox{x0, y0, x1 - x0 + 1, y1 - y0 + 1}, std::clamp(saliency, 0.0, 1.0), image_id});
    }
    return out;
  }

  nlohmann::json describe() const override {
    return {{"type", "blob"},
            {"polarity", cfg_.polarity == Polarity::Dark ? "dark" : "bright"},
            {"smooth_radius", cfg_.smooth_radius},
            {"background_radius", cfg_.background_radius},
            {"threshold", cfg_.threshold},
            {"min_area", cfg_.min_area}};
  }

 private:
  // Mean over the (2r+1)^2 window clipped to the image, via an integral image.
  static std::vector<double> box_mean(const std::vector<double>& v, int h, int w, int r) {
    std::vector<double> integral(static_cast<std::size_t>(h + 1) * (w + 1), 0.0);
    for (int y = 0; y < h; ++y) {
      double row = 0;
      for (int x = 0; x < w; ++x) {
        row += v[static_cast<std::size_t>(y) * w + x];
        integral[static_cast<std::size_t>(y + 1) * (w + 1) + x + 1] =
            integral[static_cast<std::size_t>(y) * (w + 1) + x + 1] + row;
      }
    }
    std::vector<double> out(v.size());
    for (int y = 0; y < h; ++y) {
      const int ya = std::max(0, y - r), yb = std::min(h, y + r + 1);
      for (int x = 0; x < w; ++x) {
        const int xa = std::max(0, x - r), xb = std::min(w, x + r + 1);
        const auto at = [&](int yy, int xx) { return integral[static_cast<std::size_t>(yy) * (w + 1) + xx]; };
        const double s = at(yb, xb) - at(ya, xb) - at(yb, xa) + at(ya, xa);
        out[static_cast<std::size_t>(y) * w + x] = s / ((yb - ya) * (xb - xa));
      }
    }
    return out;
  }

  BlobDetectorConfig cfg_;
};

/// Returns the annotated boxes of known images with score 1 (upper-bound oracle).
class GroundTruthDetector final : public Detector {
 public:
  explicit GroundTruthDetector(std::map<std::string, std::vector<BBox>> boxes)
      : boxes_(std::move(boxes)) {}

  std::vector<Detection> detect(const GrayImage&, const std::string& image_id) const override {
    std::vector<Detection> out;
    auto it = boxes_.find(image_id);
    if (it == boxes_.end()) return out;
    for (const auto& b : it->second) out.push_back({b, 1.0, image_id});
    return out;
  }
  nlohmann::json describe() const override { return {{"type", "ground_truth"}}; }

 private:
  std::map<std::string, std::vector<BBox>> boxes_;
};

// ---------------------------------------------------------------------------
// Protocol

/// Image translation applied before detection (normalized in, normalized out).
using Translator = std::function<GrayImage(const GrayImage&)>;

struct EvaluationInput {
  std::string id;
  GrayImage image;  ///< preprocessed uint8 input
  std::vector<BBox> boxes;
};

struct EvaluationResult {
  APReport report;
  std::vector<Detection> detections;
  std::vector<std::string> skipped;  ///< ids that failed translation or detection
};

/// Translates each image, detects, matches per image, then pools detections
/// globally before computing the PR curve.
inline EvaluationResult evaluate_images(std::span<const EvaluationInput> inputs,
                                        const Translator& translator, const Detector& detector,
                                        double iou_threshold = kDefaultIouThreshold) {
  EvaluationResult res;
  std::vector<ScoredFlag> flags;
  int n_gt = 0;
  int n_images = 0;
  for (const auto& in : inputs) {
    std::vector<Detection> dets;
    try {
      const GrayImage out = translator(normalize(in.image));
      dets = detector.detect(denormalize(out), in.id);
    } catch (const std::exception&) {
      res.skipped.push_back(in.id);
      continue;
    }
    ++n_images;
    n_gt += static_cast<int>(in.boxes.size());
    const auto tp = match_detections(dets, in.boxes, iou_threshold);
    for (std::size_t i = 0; i < dets.size(); ++i) flags.push_back({dets[i].score, tp[i]});
    res.detections.insert(res.detections.end(), dets.begin(), dets.end());
  }
  res.report = average_precision(std::move(flags), n_gt);
  res.report.n_images = n_images;
  res.report.n_skipped = static_cast<int>(res.skipped.size());
  return res;
}

inline std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

inline nlohmann::json to_json(const APReport& r) {
  nlohmann::json curve = nlohmann::json::array();
  for (const auto& p : r.curve.points) curve.push_back({p.recall, p.precision, p.threshold});
  return {{"ap", r.ap},
          {"n_images", r.n_images},
          {"n_gt", r.n_gt},
          {"n_detections", r.n_detections},
          {"n_skipped", r.n_skipped},
          {"curve", curve}};
}

inline APReport ap_report_from_json(const nlohmann::json& j) {
  APReport r;
  try {
    r.ap = j.at("ap").get<double>();
    r.n_images = j.value("n_images", 0);
    r.n_gt = j.value("n_gt", 0);
    r.n_detections = j.value("n_detections", 0);
    r.n_skipped = j.value("n_skipped", 0);
    for (const auto& p : j.at("curve")) {
      r.curve.points.push_back({p[0].get<double>(), p[1].get<double>(), p[2].get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
  return r;
}

/// Writes detections.jsonl, pr.csv and report.json into `out_dir`.
inline void write_evaluation(const std::filesystem::path& out_dir, const EvaluationResult& res,
                             const nlohmann::json& provenance) {
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream out(out_dir / "detections.jsonl", std::ios::trunc);
    for (const auto& d : res.detections) {
      out << nlohmann::json{{"image_id", d.image_id},
                            {"box", {d.box.x, d.box.y, d.box.w, d.box.h}},
                            {"score", d.score}}
                 .dump()
          << '\n';
    }
  }
  {
    std::ofstream out(out_dir / "pr.csv", std::ios::trunc);
    out << "threshold,precision,recall\n" << std::setprecision(17);
    for (const auto& p : res.report.curve.points) {
      out << p.threshold << ',' << p.precision << ',' << p.recall << '\n';
    }
  }
  nlohmann::json report = to_json(res.report);
  report["skipped_ids"] = res.skipped;
  report["provenance"] = provenance;
  report["config_hash"] = fnv1a_hex(provenance.dump());
  std::ofstream out(out_dir / "report.json", std::ios::trunc);
  out << report.dump(2) << '\n';
  if (!out) throw DataError("cannot write report into '" + out_dir.string() + "'");
}

/// Picks the polarity and threshold with the best AP on annotated target-domain
/// samples. Thresholds on the optimal plateau of the winning polarity are
/// equivalent on these samples; the middle one is kept.
inline BlobDetectorConfig calibrate_blob_detector(std::span<const EvaluationInput> samples,
                                                  BlobDetectorConfig base = {}) {
  double best_ap = -1;
  Polarity best_polarity = base.polarity;
  std::vector<double> plateau;
  const Translator identity = [](const GrayImage& g) { return g; };
  for (Polarity pol : {Polarity::Dark, Polarity::Bright}) {
    for (int t = 2; t <= 40; t += 2) {
      BlobDetectorConfig cfg = base;
      cfg.polarity = pol;
      cfg.threshold = t / 100.0;
      const double ap = evaluate_images(samples, identity, BlobDetector(cfg)).report.ap;
      if (ap > best_ap + 1e-12) {
        best_ap = ap;
        best_polarity = pol;
        plateau.assign(1, cfg.threshold);
      } else if (pol == best_polarity && ap >= best_ap - 1e-12) {
        plateau.push_back(cfg.threshold);
      }
    }
  }
  BlobDetectorConfig best = base;
  best.polarity = best_polarity;
  best.threshold = plateau[(plateau.size() - 1) / 2];
  return best;
}

}  // namespace thermvis
