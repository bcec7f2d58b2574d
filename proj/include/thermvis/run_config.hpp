#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "thermvis/config.hpp"
#include "thermvis/evaluation.hpp"

namespace thermvis {

/// Everything a CLI invocation needs: schedule, networks, scenes, detector, paths.
struct RunConfig {
  std::uint64_t seed = 0;  ///< root seed; copied into train.seed
  std::string output_root = ".";
  int count = 200;         ///< synthetic scenes per domain
  TrainConfig train{};
  SceneSpec scene{};
  std::optional<BlobDetectorConfig> detector;  ///< nullopt: calibrate on a VI manifest
  double iou_threshold = kDefaultIouThreshold;

  void validate() const {
    if (count < 0) throw ConfigError("count must be >= 0");
    if (!(iou_threshold > 0 && iou_threshold <= 1)) throw ConfigError("iou_threshold must lie in (0, 1]");
    train.validate();
    scene.validate(false);
    if (detector) {
      if (detector->smooth_radius < 0 || detector->background_radius <= detector->smooth_radius) {
        throw ConfigError("detector needs 0 <= smooth_radius < background_radius");
      }
      if (detector->min_area < 1) throw ConfigError("detector min_area must be >= 1");
    }
  }
};

inline Polarity parse_polarity(const std::string& s) {
  if (s == "dark") return Polarity::Dark;
  if (s == "bright") return Polarity::Bright;
  throw ConfigError("unknown polarity '" + s + "' (expected dark|bright)");
}

inline nlohmann::json to_json(const BlobDetectorConfig& d) { return BlobDetector(d).describe(); }

inline BlobDetectorConfig blob_detector_from_json(const nlohmann::json& j, BlobDetectorConfig d = {}) {
  detail::StrictObject o(j, "detector");
  std::string type = "blob";
  o.read("type", type);
  if (type != "blob") throw ConfigError("detector.type must be 'blob'");
  std::string polarity = d.polarity == Polarity::Dark ? "dark" : "bright";
  o.read("polarity", polarity);
  d.polarity = parse_polarity(polarity);
  o.read("smooth_radius", d.smooth_radius);
  o.read("background_radius", d.background_radius);
  o.read("threshold", d.threshold);
  o.read("min_area", d.min_area);
  o.finish();
  return d;
}

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j{{"seed", c.seed},
                   {"output_root", c.output_root},
                   {"count", c.count},
                   {"train", to_json(c.train)},
                   {"scene", to_json(c.scene)},
                   {"iou_threshold", c.iou_threshold}};
  j["detector"] = c.detector ? to_json(*c.detector) : nlohmann::json(nullptr);
  return j;
}

/// Strict parse on top of `base`; the root seed always wins over train.seed.
inline RunConfig run_config_from_json(const nlohmann::json& j, RunConfig c = {}) {
  detail::StrictObject o(j, "config");
  o.read("seed", c.seed);
  o.read("output_root", c.output_root);
  o.read("count", c.count);
  o.read("iou_threshold", c.iou_threshold);
  if (const auto* t = o.child("train")) c.train = train_config_from_json(*t, c.train);
  if (const auto* s = o.child("scene")) c.scene = scene_spec_from_json(*s, c.scene);
  if (const auto* d = o.child("detector")) {
    if (d->is_null()) {
      c.detector.reset();
    } else {
      c.detector = blob_detector_from_json(*d, c.detector.value_or(BlobDetectorConfig{}));
    }
  }
  o.finish();
  c.train.seed = c.seed;
  return c;
}

// ---------------------------------------------------------------------------
// Profiles

/// Full-size networks and schedule.
inline RunConfig full_profile() { return RunConfig{}; }

/// 64x64 scenes with reduced networks, trainable on one CPU core.
inline RunConfig toy_profile() {
  RunConfig c;
  c.count = 200;
  c.train.crop_size = 64;
  c.train.batch_size = 1;
  c.train.epochs_const = 5;
  c.train.epochs_decay = 5;
  c.train.generator.base_filters = 8;
  c.train.generator.n_res_blocks = 2;
  c.train.discriminator.channel_plan = {{16, 2}, {32, 2}, {32, 1}};
  c.train.roi.out_size = 32;
  return c;
}

/// 8x8 crops, 4 base filters, 4 images per domain, 2 epochs.
inline RunConfig smoke_profile() {
  RunConfig c;
  c.count = 4;
  c.scene.width = 16;
  c.scene.height = 16;
  c.scene.min_object_size = 4;
  c.scene.max_object_size = 6;
  c.train.crop_size = 8;
  c.train.batch_size = 2;
  c.train.epochs_const = 1;
  c.train.epochs_decay = 1;
  c.train.generator.base_filters = 4;
  c.train.generator.n_res_blocks = 1;
  c.train.discriminator.channel_plan = {{4, 2}, {8, 2}};
  c.train.roi.out_size = 8;
  c.detector = BlobDetectorConfig{Polarity::Dark, 1, 4, 0.12, 4};
  return c;
}

inline RunConfig profile(const std::string& name) {
  if (name == "full") return full_profile();
  if (name == "toy") return toy_profile();
  if (name == "smoke") return smoke_profile();
  throw ConfigError("unknown profile '" + name + "' (expected full|toy|smoke)");
}

// ---------------------------------------------------------------------------
// Overrides

/// Applies "dotted.key=value" to a config document. The value is parsed as
/// JSON when possible and kept as a string otherwise.
inline void apply_override(nlohmann::json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' must look like key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  nlohmann::json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
    if (!node->is_object()) throw ConfigError("override key '" + key + "' descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = nlohmann::json::object();
    start = dot + 1;
  }
}

/// Profile, then config file, then overrides (in order). Validated.
inline RunConfig resolve_run_config(const std::string& profile_name,
                                    const std::optional<std::filesystem::path>& file,
                                    const std::vector<std::string>& overrides) {
  nlohmann::json doc = to_json(profile(profile_name));
  if (file) {
    const nlohmann::json user = read_json_file(*file);
    if (!user.is_object()) throw ConfigError("config '" + file->string() + "' must be an object");
    doc.merge_patch(user);
  }
  for (const auto& o : overrides) apply_override(doc, o);
  RunConfig c = run_config_from_json(doc, profile(profile_name));
  c.validate();
  return c;
}

/// Relative paths land under the output root: THERMVIS_OUTPUT_ROOT if set,
/// else the configured root.
inline std::filesystem::path output_path(const RunConfig& c, const std::filesystem::path& p) {
  if (p.is_absolute()) return p;
  const char* env = std::getenv("THERMVIS_OUTPUT_ROOT");
  const std::filesystem::path root = env && *env ? std::filesystem::path(env) : std::filesystem::path(c.output_root);
  return root / p;
}

}  // namespace thermvis
