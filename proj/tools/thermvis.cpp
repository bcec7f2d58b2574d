// thermvis command-line tool: synth-data, train, translate, evaluate, plot-pr.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "thermvis/thermvis.hpp"

namespace fs = std::filesystem;
using namespace thermvis;

namespace {

enum Exit : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kConfig = 3,
  kCheckpoint = 4,
  kData = 5,
  kIo = 6,
  kNumeric = 7,
};

constexpr const char* kExitCodes =
    "Exit codes: 0 ok, 2 usage, 3 invalid config, 4 missing or unreadable checkpoint,\n"
    "5 missing or malformed manifest/image data, 6 output I/O failure, 7 non-finite loss, 1 other.";

struct Common {
  std::string profile = "full";
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string output_root;

  void attach(CLI::App* cmd) {
    cmd->add_option("--profile", profile, "Base settings: full, toy or smoke")
        ->check(CLI::IsMember({"full", "toy", "smoke"}));
    cmd->add_option("--config", config, "JSON config file applied on top of the profile")->check(CLI::ExistingFile);
    cmd->add_option("--set", overrides, "Override a config key, e.g. --set train.lr=1e-3 (repeatable)");
    cmd->add_option("--seed", seed, "Root seed (overrides the config)");
    cmd->add_option("--output-root", output_root,
                    "Directory for relative output paths (default: $THERMVIS_OUTPUT_ROOT, else config output_root)");
  }

  RunConfig resolve() const {
    std::vector<std::string> all = overrides;
    if (seed) all.push_back("seed=" + std::to_string(*seed));
    if (!output_root.empty()) all.push_back("output_root=" + nlohmann::json(output_root).dump());
    RunConfig c = resolve_run_config(profile, config.empty() ? std::nullopt : std::optional<fs::path>(config), all);
    if (!output_root.empty()) c.output_root = output_root;
    return c;
  }

  fs::path out(const RunConfig& c, const std::string& p) const {
    // an explicit --output-root beats the environment
    if (!output_root.empty() && !fs::path(p).is_absolute()) return fs::path(output_root) / p;
    return output_path(c, p);
  }
};

void write_json(const fs::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  out << j.dump(2) << '\n';
  if (!out) throw fs::filesystem_error("cannot write", path, std::make_error_code(std::errc::io_error));
}

fs::path require_checkpoint(const std::string& p) {
  if (!fs::exists(p)) throw CheckpointError("checkpoint '" + p + "' does not exist");
  return p;
}

// ---------------------------------------------------------------------------

int synth_data(const Common& common, const std::string& out_arg, std::optional<int> count, int test_count) {
  RunConfig c = common.resolve();
  if (count) c.count = *count;
  if (c.count < 0 || test_count < 0) throw ConfigError("counts must be >= 0");
  const fs::path out = common.out(c, out_arg);
  struct Split {
    const char* dir;
    Domain domain;
    int count;
    std::uint64_t seed;
  };
  const std::uint64_t test_seed = c.seed ^ 0x9e3779b97f4a7c15ull;
  const Split splits[] = {{"IR", Domain::IR, c.count, c.seed},
                          {"VI", Domain::VI, c.count, c.seed},
                          {"test_IR", Domain::IR, test_count, test_seed},
                          {"test_VI", Domain::VI, test_count, test_seed}};
  for (const auto& s : splits) {
    if (s.count == 0 && std::string(s.dir).starts_with("test_")) continue;
    fs::remove_all(out / s.dir);
    const auto manifest = write_dataset(out / s.dir, synthesize_set(s.domain, s.count, s.seed, c.scene));
    std::cout << s.dir << ": " << s.count << " scenes -> " << manifest.string() << '\n';
  }
  write_json(out / "synth.json", {{"seed", c.seed},
                                  {"count", c.count},
                                  {"test_count", test_count},
                                  {"scene", to_json(c.scene)}});
  return kOk;
}

int train_cmd(const Common& common, const std::string& data, std::string ir, std::string vi,
              const std::string& out_arg, const std::string& resume, std::optional<int> max_epochs) {
  const RunConfig c = common.resolve();
  if (ir.empty() || vi.empty()) {
    if (data.empty()) throw ConfigError("train needs --data or both --ir and --vi");
    ir = (fs::path(data) / "IR" / "manifest.jsonl").string();
    vi = (fs::path(data) / "VI" / "manifest.jsonl").string();
  }
  const fs::path out = common.out(c, out_arg);
  TrainOptions opt;
  if (!resume.empty()) opt.resume_from = require_checkpoint(resume);
  opt.max_epochs = max_epochs;
  opt.on_step = [](int epoch, long it, const LossReport& r) {
    if (it % 100 != 0) return;
    std::cout << "epoch " << epoch << " iter " << it << " total_G " << r.total_g << " total_D " << r.total_d
              << std::endl;
  };
  write_json(out / "run_config.json", to_json(c));
  const fs::path ckpt = train<float>(c.train, fs::path(ir), fs::path(vi), out, opt);
  std::cout << ckpt.string() << '\n';
  return kOk;
}

int translate_cmd(const Common& common, const std::string& checkpoint, const std::string& manifest_path,
                  const std::string& out_arg) {
  const RunConfig c = common.resolve();
  const fs::path ckpt = require_checkpoint(checkpoint);
  const TrainConfig tc = checkpoint_config(Archive::load(ckpt));
  const Generator<float> g = load_generator<float>(ckpt);

  const DatasetManifest m = read_manifest(manifest_path, false);
  const fs::path out = common.out(c, out_arg);
  std::vector<Sample> translated;
  std::vector<std::string> skipped;
  for (const auto& e : m.entries) {
    try {
      Sample s = load_sample(m, e);
      const GrayImage in = s.domain == Domain::IR ? histogram_equalize(s.image) : s.image;
      translated.push_back({denormalize(translate(g, normalize(in))), s.boxes, Domain::VI, s.id});
    } catch (const Error& ex) {
      std::cerr << "skipping '" << e.id << "': " << ex.what() << '\n';
      skipped.push_back(e.id);
    }
  }
  const auto written = write_dataset(out, translated);
  write_json(out / "provenance.json", {{"checkpoint", ckpt.string()},
                                       {"manifest", manifest_path},
                                       {"seed", tc.seed},
                                       {"skipped_ids", skipped}});
  std::cout << translated.size() << " images -> " << written.string() << '\n';
  return kOk;
}

int evaluate_cmd(const Common& common, const std::string& checkpoint, const std::string& manifest_path,
                 const std::string& calibrate_on, const std::string& out_arg, const std::string& label) {
  const RunConfig c = common.resolve();
  BlobDetectorConfig det_cfg;
  if (!calibrate_on.empty()) {
    const auto vi = load_evaluation_inputs(read_manifest(calibrate_on));
    det_cfg = calibrate_blob_detector(vi.inputs, c.detector.value_or(BlobDetectorConfig{}));
  } else if (c.detector) {
    det_cfg = *c.detector;
  } else {
    throw ConfigError("no detector: set 'detector' in the config or pass --calibrate-on");
  }
  const BlobDetector detector(det_cfg);
  const fs::path out = common.out(c, out_arg);

  nlohmann::json provenance{{"manifest", manifest_path}, {"detector", detector.describe()}, {"label", label}};
  APReport report;
  if (!checkpoint.empty()) {
    report = evaluate_translation<float>(require_checkpoint(checkpoint), manifest_path, detector, out);
    // fold the label into the written report
    std::ifstream in(out / "report.json");
    nlohmann::json j = nlohmann::json::parse(in);
    j["provenance"]["label"] = label;
    write_json(out / "report.json", j);
  } else {
    const DatasetManifest m = read_manifest(manifest_path, false);
    const LoadedInputs loaded = load_evaluation_inputs(m);
    EvaluationResult res = evaluate_images(loaded.inputs, identity_translator(), detector, c.iou_threshold);
    res.skipped.insert(res.skipped.begin(), loaded.failed.begin(), loaded.failed.end());
    res.report.n_skipped = static_cast<int>(res.skipped.size());
    provenance["checkpoint"] = nullptr;
    provenance["seed"] = c.seed;
    write_evaluation(out, res, provenance);
    report = res.report;
  }
  std::cout << "AP " << report.ap << " over " << report.n_images << " images (" << report.n_gt << " objects, "
            << report.n_skipped << " skipped) -> " << (out / "report.json").string() << '\n';
  return kOk;
}

int plot_cmd(const Common& common, const std::vector<std::string>& reports, std::vector<std::string> labels,
             const std::string& out_arg) {
  const RunConfig c = common.resolve();
  if (!labels.empty() && labels.size() != reports.size()) {
    throw ConfigError("give one --label per report or none");
  }
  std::vector<LabeledCurve> curves;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    std::ifstream in(reports[i]);
    if (!in) throw DataError("cannot open report '" + reports[i] + "'");
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw DataError("report '" + reports[i] + "' is not JSON");
    std::string label = labels.empty() ? "" : labels[i];
    if (label.empty() && j.contains("provenance") && j["provenance"].value("label", "") != "") {
      label = j["provenance"]["label"].get<std::string>();
    }
    if (label.empty()) label = fs::path(reports[i]).parent_path().filename().string();
    curves.push_back({label, ap_report_from_json(j)});
  }
  const fs::path out = common.out(c, out_arg);
  write_pr_svg(out, curves);
  std::cout << curves.size() << " curves -> " << out.string() << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unsupervised IR-to-visible image translation: data, training, translation, evaluation."};
  app.footer(kExitCodes);
  app.require_subcommand(1);

  Common common;

  auto* synth = app.add_subcommand("synth-data", "Write synthetic IR and VI scenes with box manifests");
  std::string synth_out = "data";
  std::optional<int> synth_count;
  int test_count = 0;
  common.attach(synth);
  synth->add_option("--out", synth_out, "Output directory (IR/, VI/ and optional test_IR/, test_VI/)");
  synth->add_option("--count", synth_count, "Scenes per domain (overrides config count)");
  synth->add_option("--test-count", test_count, "Held-out scenes per domain");

  auto* train_sub = app.add_subcommand("train", "Train both mappings and all four critics");
  std::string data, ir, vi, train_out = "run", resume;
  std::optional<int> max_epochs;
  common.attach(train_sub);
  train_sub->add_option("--data", data, "Directory written by synth-data");
  train_sub->add_option("--ir", ir, "IR manifest");
  train_sub->add_option("--vi", vi, "VI manifest");
  train_sub->add_option("--out", train_out, "Run directory (metrics.csv, checkpoints/, final.ckpt)");
  train_sub->add_option("--resume", resume, "Continue from a checkpoint");
  train_sub->add_option("--max-epochs", max_epochs, "Stop after this many epochs in this call");

  auto* translate_sub = app.add_subcommand("translate", "Translate full-size IR images to VI");
  std::string tr_ckpt, tr_manifest, tr_out = "translated";
  common.attach(translate_sub);
  translate_sub->add_option("--checkpoint", tr_ckpt, "Training checkpoint")->required();
  translate_sub->add_option("--manifest", tr_manifest, "IR manifest")->required();
  translate_sub->add_option("--out", tr_out, "Output directory (images/, manifest.jsonl)");

  auto* eval_sub = app.add_subcommand("evaluate", "Detect objects on translated (or raw) images and report AP");
  std::string ev_ckpt, ev_manifest, ev_calib, ev_out = "eval", ev_label;
  common.attach(eval_sub);
  eval_sub->add_option("--checkpoint", ev_ckpt, "Training checkpoint; omit to score raw images");
  eval_sub->add_option("--manifest", ev_manifest, "Annotated IR manifest")->required();
  eval_sub->add_option("--calibrate-on", ev_calib, "Annotated VI manifest used to tune the detector");
  eval_sub->add_option("--out", ev_out, "Output directory (report.json, pr.csv, detections.jsonl)");
  eval_sub->add_option("--label", ev_label, "Curve label stored in the report");

  auto* plot_sub = app.add_subcommand("plot-pr", "Overlay PR curves of several reports in one SVG");
  std::vector<std::string> reports, labels;
  std::string plot_out = "pr.svg";
  common.attach(plot_sub);
  plot_sub->add_option("reports", reports, "report.json files")->required()->check(CLI::ExistingFile);
  plot_sub->add_option("--label", labels, "Curve labels, one per report (repeatable)");
  plot_sub->add_option("--out", plot_out, "SVG output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    const CLI::App* failing = &app;
    for (auto* sub : app.get_subcommands()) failing = sub;
    std::cerr << failing->help();
    return kUsage;
  }

  try {
    if (*synth) return synth_data(common, synth_out, synth_count, test_count);
    if (*train_sub) return train_cmd(common, data, ir, vi, train_out, resume, max_epochs);
    if (*translate_sub) return translate_cmd(common, tr_ckpt, tr_manifest, tr_out);
    if (*eval_sub) return evaluate_cmd(common, ev_ckpt, ev_manifest, ev_calib, ev_out, ev_label);
    if (*plot_sub) return plot_cmd(common, reports, labels, plot_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << '\n';
    return kCheckpoint;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kNumeric;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInternal;
  }
  return kUsage;
}
