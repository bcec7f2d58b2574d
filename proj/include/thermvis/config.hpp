#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "thermvis/discriminator.hpp"
#include "thermvis/error.hpp"
#include "thermvis/generator.hpp"
#include "thermvis/losses.hpp"
#include "thermvis/roi.hpp"
#include "thermvis/synth.hpp"

namespace thermvis {

/// Optimization schedule and everything needed to rebuild the six networks.
struct TrainConfig {
  double lr = 2e-4;
  int epochs_const = 20;
  int epochs_decay = 20;
  int batch_size = 2;
  LossWeights weights{};
  std::uint64_t seed = 0;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  int replay_buffer = 50;
  NormKind norm = NormKind::Batch;  ///< applied to generators and discriminators
  int checkpoint_every = 1;         ///< epochs
  int crop_size = 256;
  double init_std = 0.02;
  AdversarialKind adversarial = AdversarialKind::Log;
  GeneratorConfig generator{};
  DiscriminatorConfig discriminator{};
  RoiPoolSpec roi{};

  int total_epochs() const { return epochs_const + epochs_decay; }

  GeneratorConfig generator_config() const {
    GeneratorConfig g = generator;
    g.norm = norm;
    return g;
  }
  DiscriminatorConfig discriminator_config() const {
    DiscriminatorConfig d = discriminator;
    d.norm = norm;
    return d;
  }

  void validate() const {
    if (!(lr > 0)) throw ConfigError("lr must be > 0");
    if (epochs_const < 0 || epochs_decay < 0) throw ConfigError("epoch counts must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (replay_buffer < 0) throw ConfigError("replay_buffer must be >= 0");
    if (checkpoint_every < 1) throw ConfigError("checkpoint_every must be >= 1");
    if (crop_size < 4 || crop_size % 4 != 0) throw ConfigError("crop_size must be a positive multiple of 4");
    if (!(adam_beta1 >= 0 && adam_beta1 < 1 && adam_beta2 >= 0 && adam_beta2 < 1)) {
      throw ConfigError("adam betas must lie in [0, 1)");
    }
    if (!(init_std > 0)) throw ConfigError("init_std must be > 0");
    try {
      weights.validate();
    } catch (const ContractError& e) {
      throw ConfigError(e.what());
    }
    generator_config().validate();
    discriminator_config().validate();
    roi.validate();
    if (score_map_extent(crop_size, discriminator.channel_plan) < 1) {
      throw ConfigError("crop_size too small for the discriminator plan");
    }
    if (score_map_extent(roi.out_size, discriminator.channel_plan) < 1) {
      throw ConfigError("roi out_size too small for the discriminator plan");
    }
  }
};

namespace detail {

/// Reads keys from a JSON object and rejects any it did not consume.
class StrictObject {
 public:
  StrictObject(const nlohmann::json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j.is_object()) throw ConfigError(where_ + ": expected an object");
  }
  ~StrictObject() = default;

  template <typename V>
  void read(const char* key, V& dst) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      dst = j_.at(key).get<V>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }

  const nlohmann::json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError(where_ + ": unknown key '" + k + "'");
    }
  }

 private:
  const nlohmann::json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

}  // namespace detail

inline nlohmann::json to_json(const GeneratorConfig& g) {
  return {{"base_filters", g.base_filters},
          {"n_res_blocks", g.n_res_blocks},
          {"in_channels", g.in_channels},
          {"out_channels", g.out_channels},
          {"padding", g.padding == PadMode::Reflect ? "reflect" : "zero"},
          {"structure_connection", g.structure_connection}};
}

inline GeneratorConfig generator_config_from_json(const nlohmann::json& j,
                                                  GeneratorConfig g = {}) {
  detail::StrictObject o(j, "generator");
  o.read("base_filters", g.base_filters);
  o.read("n_res_blocks", g.n_res_blocks);
  o.read("in_channels", g.in_channels);
  o.read("out_channels", g.out_channels);
  std::string pad = g.padding == PadMode::Reflect ? "reflect" : "zero";
  o.read("padding", pad);
  if (pad != "reflect" && pad != "zero") throw ConfigError("generator.padding must be reflect|zero");
  g.padding = pad == "reflect" ? PadMode::Reflect : PadMode::Zero;
  o.read("structure_connection", g.structure_connection);
  o.finish();
  return g;
}

inline nlohmann::json to_json(const DiscriminatorConfig& d) {
  nlohmann::json plan = nlohmann::json::array();
  for (const auto& e : d.channel_plan) plan.push_back({e.filters, e.stride});
  return {{"channel_plan", plan}, {"in_channels", d.in_channels}, {"leaky_slope", d.leaky_slope}};
}

inline DiscriminatorConfig discriminator_config_from_json(const nlohmann::json& j,
                                                          DiscriminatorConfig d = {}) {
  detail::StrictObject o(j, "discriminator");
  if (const auto* plan = o.child("channel_plan")) {
    d.channel_plan.clear();
    for (const auto& e : *plan) {
      if (!e.is_array() || e.size() != 2) {
        throw ConfigError("discriminator.channel_plan entries must be [filters, stride]");
      }
      d.channel_plan.push_back({e[0].get<int>(), e[1].get<int>()});
    }
  }
  o.read("in_channels", d.in_channels);
  o.read("leaky_slope", d.leaky_slope);
  o.finish();
  return d;
}

inline nlohmann::json to_json(const RoiPoolSpec& r) {
  return {{"out_size", r.out_size}, {"method", to_string(r.method)}};
}

inline RoiPoolSpec roi_spec_from_json(const nlohmann::json& j, RoiPoolSpec r = {}) {
  detail::StrictObject o(j, "roi");
  o.read("out_size", r.out_size);
  std::string m = to_string(r.method);
  o.read("method", m);
  r.method = parse_roi_method(m);
  o.finish();
  return r;
}

inline nlohmann::json to_json(const SceneSpec& s) {
  return {{"width", s.width},
          {"height", s.height},
          {"min_objects", s.min_objects},
          {"max_objects", s.max_objects},
          {"min_object_size", s.min_object_size},
          {"max_object_size", s.max_object_size},
          {"ir_background", s.ir_background},
          {"ir_noise", s.ir_noise},
          {"ir_object_level", s.ir_object_level},
          {"vi_background", s.vi_background},
          {"vi_texture", s.vi_texture},
          {"vi_object_level", s.vi_object_level},
          {"vi_object_texture", s.vi_object_texture}};
}

inline SceneSpec scene_spec_from_json(const nlohmann::json& j, SceneSpec s = {}) {
  detail::StrictObject o(j, "scene");
  o.read("width", s.width);
  o.read("height", s.height);
  o.read("min_objects", s.min_objects);
  o.read("max_objects", s.max_objects);
  o.read("min_object_size", s.min_object_size);
  o.read("max_object_size", s.max_object_size);
  o.read("ir_background", s.ir_background);
  o.read("ir_noise", s.ir_noise);
  o.read("ir_object_level", s.ir_object_level);
  o.read("vi_background", s.vi_background);
  o.read("vi_texture", s.vi_texture);
  o.read("vi_object_level", s.vi_object_level);
  o.read("vi_object_texture", s.vi_object_texture);
  o.finish();
  return s;
}

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"lr", c.lr},
          {"epochs_const", c.epochs_const},
          {"epochs_decay", c.epochs_decay},
          {"batch_size", c.batch_size},
          {"lambda_cyc", c.weights.lambda_cyc},
          {"lambda_roi", c.weights.lambda_roi},
          {"seed", c.seed},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"replay_buffer", c.replay_buffer},
          {"norm", to_string(c.norm)},
          {"checkpoint_every", c.checkpoint_every},
          {"crop_size", c.crop_size},
          {"init_std", c.init_std},
          {"adversarial", to_string(c.adversarial)},
          {"generator", to_json(c.generator)},
          {"discriminator", to_json(c.discriminator)},
          {"roi", to_json(c.roi)}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c = {}) {
  detail::StrictObject o(j, "train");
  o.read("lr", c.lr);
  o.read("epochs_const", c.epochs_const);
  o.read("epochs_decay", c.epochs_decay);
  o.read("batch_size", c.batch_size);
  o.read("lambda_cyc", c.weights.lambda_cyc);
  o.read("lambda_roi", c.weights.lambda_roi);
  o.read("seed", c.seed);
  o.read("adam_beta1", c.adam_beta1);
  o.read("adam_beta2", c.adam_beta2);
  o.read("replay_buffer", c.replay_buffer);
  std::string norm = to_string(c.norm);
  o.read("norm", norm);
  c.norm = parse_norm(norm);
  o.read("checkpoint_every", c.checkpoint_every);
  o.read("crop_size", c.crop_size);
  o.read("init_std", c.init_std);
  std::string adv = to_string(c.adversarial);
  o.read("adversarial", adv);
  c.adversarial = parse_adversarial(adv);
  if (const auto* g = o.child("generator")) c.generator = generator_config_from_json(*g, c.generator);
  if (const auto* d = o.child("discriminator")) {
    c.discriminator = discriminator_config_from_json(*d, c.discriminator);
  }
  if (const auto* r = o.child("roi")) c.roi = roi_spec_from_json(*r, c.roi);
  o.finish();
  return c;
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + path.string() + "': " + e.what());
  }
}

}  // namespace thermvis
