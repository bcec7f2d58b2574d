#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "thermvis/evaluation.hpp"
#include "thermvis/manifest.hpp"
#include "thermvis/png_io.hpp"
#include "thermvis/synth.hpp"
#include "thermvis/trainer.hpp"

namespace thermvis {

/// Detector inputs for a manifest: IR is histogram-equalized, VI is used as is.
/// Entries whose image cannot be read are returned in `failed`.
struct LoadedInputs {
  std::vector<EvaluationInput> inputs;
  std::vector<std::string> failed;
};

inline LoadedInputs load_evaluation_inputs(const DatasetManifest& m) {
  LoadedInputs out;
  for (const auto& e : m.entries) {
    try {
      Sample s = load_sample(m, e);
      if (s.domain == Domain::IR) s.image = histogram_equalize(s.image);
      out.inputs.push_back({s.id, std::move(s.image), std::move(s.boxes)});
    } catch (const Error&) {
      out.failed.push_back(e.id);
    }
  }
  return out;
}

/// Writes `<dir>/images/<id>.png` for each sample plus `<dir>/manifest.jsonl`.
inline std::filesystem::path write_dataset(const std::filesystem::path& dir,
                                           const std::vector<Sample>& samples) {
  std::filesystem::create_directories(dir / "images");
  DatasetManifest m;
  m.root = dir;
  for (const auto& s : samples) {
    const std::string file = "images/" + s.id + ".png";
    write_png(dir / file, s.image);
    m.entries.push_back({s.id, file, s.domain, s.boxes});
  }
  const auto path = dir / "manifest.jsonl";
  write_manifest(path, m);
  return path;
}

template <typename T>
Translator generator_translator(const Generator<T>& g) {
  return [&g](const GrayImage& x) { return translate(g, x); };
}

inline Translator identity_translator() {
  return [](const GrayImage& x) { return x; };
}

/// Translates every image of an IR manifest at full size with the checkpoint's
/// IR -> VI generator, detects, and writes detections.jsonl, pr.csv and report.json.
template <typename T = float>
APReport evaluate_translation(const std::filesystem::path& checkpoint,
                              const std::filesystem::path& ir_manifest, const Detector& detector,
                              const std::filesystem::path& out_dir) {
  const Archive archive = Archive::load(checkpoint);
  const TrainConfig cfg = checkpoint_config(archive);
  Generator<T> g(cfg.generator_config());
  auto view = g.state();
  get_state(archive, "G", view);

  const DatasetManifest m = read_manifest(ir_manifest, false);
  LoadedInputs loaded = load_evaluation_inputs(m);
  EvaluationResult res = evaluate_images(loaded.inputs, generator_translator(g), detector);
  res.skipped.insert(res.skipped.begin(), loaded.failed.begin(), loaded.failed.end());
  res.report.n_skipped = static_cast<int>(res.skipped.size());
  write_evaluation(out_dir, res,
                   {{"checkpoint", checkpoint.string()},
                    {"manifest", ir_manifest.string()},
                    {"seed", cfg.seed},
                    {"train", to_json(cfg)},
                    {"detector", detector.describe()}});
  return res.report;
}

}  // namespace thermvis
