#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "thermvis/checkpoint.hpp"
#include "thermvis/config.hpp"
#include "thermvis/crop.hpp"
#include "thermvis/losses.hpp"
#include "thermvis/manifest.hpp"
#include "thermvis/optim.hpp"
#include "thermvis/replay_buffer.hpp"

namespace thermvis {

/// Learning rate for a 0-indexed epoch: constant for the first
/// epochs_const epochs, then linear decay that reaches 0 at
/// epoch == epochs_const + epochs_decay.
inline double lr_at(int epoch, const TrainConfig& cfg) {
  const int total = cfg.total_epochs();
  if (epoch < 0 || epoch > total) {
    throw ContractError("epoch " + std::to_string(epoch) + " outside [0, " +
                        std::to_string(total) + "]");
  }
  if (epoch < cfg.epochs_const) return cfg.lr;
  const double remaining = static_cast<double>(total - epoch) / cfg.epochs_decay;
  return cfg.lr * remaining;
}

/// Everything that evolves during training.
template <typename T>
struct TrainState {
  TrainConfig config;
  MappingPair<T> nets;
  DiscriminatorSet<T> discs;
  Adam<T> gen_opt;
  Adam<T> opt_global_vi, opt_global_ir, opt_roi_vi, opt_roi_ir;
  ReplayBuffer<T> pool_vi;  ///< fakes for the global VI critic
  ReplayBuffer<T> pool_ir;
  int epoch = 0;
  long iteration = 0;
  std::mt19937_64 rng;

  /// Fresh networks drawn in the order G, F, D^g_VI, D^g_IR, D^roi_VI, D^roi_IR.
  static TrainState create(const TrainConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    const auto gc = cfg.generator_config();
    const auto dc = cfg.discriminator_config();
    MappingPair<T> nets{build_generator<T>(gc, rng, cfg.init_std),
                        build_generator<T>(gc, rng, cfg.init_std)};
    DiscriminatorSet<T> discs{build_patch_discriminator<T>(dc, rng, cfg.init_std),
                              build_patch_discriminator<T>(dc, rng, cfg.init_std),
                              build_patch_discriminator<T>(dc, rng, cfg.init_std),
                              build_patch_discriminator<T>(dc, rng, cfg.init_std)};
    return TrainState(cfg, std::move(nets), std::move(discs), std::move(rng));
  }

  TrainState(TrainState&&) noexcept = default;

  /// Named parameter/buffer views of the six networks.
  std::vector<std::pair<std::string, StateView<T>>> networks() {
    return {{"G", nets.g.state()},
            {"F", nets.f.state()},
            {"D_g_VI", discs.global_vi.state()},
            {"D_g_IR", discs.global_ir.state()},
            {"D_roi_VI", discs.roi_vi.state()},
            {"D_roi_IR", discs.roi_ir.state()}};
  }

  std::vector<std::pair<std::string, Adam<T>*>> optimizers() {
    return {{"gen", &gen_opt},
            {"D_g_VI", &opt_global_vi},
            {"D_g_IR", &opt_global_ir},
            {"D_roi_VI", &opt_roi_vi},
            {"D_roi_IR", &opt_roi_ir}};
  }

 private:
  static std::vector<std::pair<std::string, Param<T>*>> prefixed(const std::string& prefix,
                                                                 StateView<T> view) {
    std::vector<std::pair<std::string, Param<T>*>> out;
    for (auto& [n, p] : view.params) out.emplace_back(prefix + "." + n, p);
    return out;
  }

  TrainState(const TrainConfig& cfg, MappingPair<T> n, DiscriminatorSet<T> d, std::mt19937_64 r)
      : config(cfg), nets(std::move(n)), discs(std::move(d)),
        pool_vi(cfg.replay_buffer), pool_ir(cfg.replay_buffer), rng(std::move(r)) {
    auto gen = prefixed("G", nets.g.state());
    auto f = prefixed("F", nets.f.state());
    gen.insert(gen.end(), f.begin(), f.end());
    const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
    gen_opt = Adam<T>(std::move(gen), b1, b2);
    opt_global_vi = Adam<T>(prefixed("D_g_VI", discs.global_vi.state()), b1, b2);
    opt_global_ir = Adam<T>(prefixed("D_g_IR", discs.global_ir.state()), b1, b2);
    opt_roi_vi = Adam<T>(prefixed("D_roi_VI", discs.roi_vi.state()), b1, b2);
    opt_roi_ir = Adam<T>(prefixed("D_roi_IR", discs.roi_ir.state()), b1, b2);
  }
};

namespace detail {

inline void require_finite(const LossReport& r, long iteration) {
  const auto values = r.values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw NumericError(std::string("loss term '") + LossReport::kColumns[i] +
                         "' is not finite at iteration " + std::to_string(iteration));
    }
  }
}

}  // namespace detail

/// One alternating update: G and F jointly against frozen critics, then each
/// critic against detached fakes (replayed for the global critics).
template <typename T>
LossReport train_step(TrainState<T>& s, const DomainBatch<T>& x, const DomainBatch<T>& y,
                      double lr) {
  const TrainConfig& cfg = s.config;
  ObjectiveOptions opt{cfg.roi, cfg.adversarial, Mode::Train, true, false};

  s.gen_opt.zero_grad();
  auto pass = generator_objective(s.nets, s.discs, x, y, TermCoefficients::from(cfg.weights), opt);
  detail::require_finite(pass.report, s.iteration);
  s.gen_opt.step(lr);

  DiscriminatorInputs<T> fakes{s.pool_vi.query(pass.fake_vi, s.rng),
                               s.pool_ir.query(pass.fake_ir, s.rng), pass.fake_vi, pass.fake_ir};
  for (auto& [name, o] : s.optimizers()) {
    if (name != "gen") o->zero_grad();
  }
  const auto dr = discriminator_objective(s.discs, x, y, fakes, opt);
  pass.report.total_d = dr.total();
  detail::require_finite(pass.report, s.iteration);
  s.opt_global_vi.step(lr);
  s.opt_global_ir.step(lr);
  s.opt_roi_vi.step(lr);
  s.opt_roi_ir.step(lr);
  ++s.iteration;
  return pass.report;
}

// ---------------------------------------------------------------------------
// Checkpoints

template <typename T>
void save_checkpoint(TrainState<T>& s, const std::filesystem::path& path) {
  Archive a;
  for (auto& [prefix, view] : s.networks()) put_state(a, prefix, view);
  nlohmann::json steps = nlohmann::json::object();
  for (auto& [name, o] : s.optimizers()) {
    for (auto& [n, t] : o->moments("opt." + name)) a.put(n, *t);
    steps[name] = o->steps();
  }
  auto put_pool = [&](const std::string& name, const ReplayBuffer<T>& pool) {
    if (pool.size() == 0) return;
    a.put(name, concat_batch<T>(pool.items()));
  };
  put_pool("replay.VI", s.pool_vi);
  put_pool("replay.IR", s.pool_ir);
  std::ostringstream rng;
  rng << s.rng;
  a.meta = {{"format", "thermvis-train-state"},
            {"dtype", Archive::dtype<T>()},
            {"config", to_json(s.config)},
            {"epoch", s.epoch},
            {"iteration", s.iteration},
            {"rng", rng.str()},
            {"optimizer_steps", steps},
            {"seed", s.config.seed}};
  a.save(path);
}

inline TrainConfig checkpoint_config(const Archive& a) {
  try {
    return train_config_from_json(a.meta.at("config"));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint has no usable config: ") + e.what());
  }
}

template <typename T>
TrainState<T> load_checkpoint(const std::filesystem::path& path) {
  const Archive a = Archive::load(path);
  TrainState<T> s = TrainState<T>::create(checkpoint_config(a));
  for (auto& [prefix, view] : s.networks()) get_state(a, prefix, view);
  for (auto& [name, o] : s.optimizers()) {
    for (auto& [n, t] : o->moments("opt." + name)) a.get_into(n, *t);
    o->set_steps(a.meta.at("optimizer_steps").at(name).template get<long>());
  }
  auto get_pool = [&](const std::string& name, ReplayBuffer<T>& pool) {
    pool.items().clear();
    if (!a.contains(name)) return;
    const Tensor<T> all = a.get<T>(name);
    for (int n = 0; n < all.n(); ++n) pool.items().push_back(all.slice(n, 1));
  };
  get_pool("replay.VI", s.pool_vi);
  get_pool("replay.IR", s.pool_ir);
  s.epoch = a.meta.at("epoch").get<int>();
  s.iteration = a.meta.at("iteration").get<long>();
  std::istringstream rng(a.meta.at("rng").get<std::string>());
  rng >> s.rng;
  return s;
}

/// Loads only G (IR -> VI) from a training checkpoint.
template <typename T>
Generator<T> load_generator(const std::filesystem::path& path, const std::string& which = "G") {
  const Archive a = Archive::load(path);
  const TrainConfig cfg = checkpoint_config(a);
  Generator<T> g(cfg.generator_config());
  auto view = g.state();
  get_state(a, which, view);
  return g;
}

// ---------------------------------------------------------------------------
// Data

/// Loads a manifest's samples; IR images are histogram-equalized.
inline std::vector<Sample> load_domain(const DatasetManifest& m, Domain domain) {
  std::vector<Sample> out;
  out.reserve(m.entries.size());
  for (const auto& e : m.entries) {
    if (e.domain != domain) {
      throw DataError("entry '" + e.id + "' has domain " + to_string(e.domain) + ", expected " +
                      to_string(domain));
    }
    Sample s = load_sample(m, e);
    if (domain == Domain::IR) s.image = histogram_equalize(s.image);
    out.push_back(std::move(s));
  }
  return out;
}

/// Deterministic unpaired batch stream: IR and VI are shuffled independently
/// each epoch, an epoch covers the larger set, and the smaller set wraps.
template <typename T>
class BatchSource {
 public:
  BatchSource(std::vector<Sample> ir, std::vector<Sample> vi, const TrainConfig& cfg)
      : ir_(std::move(ir)), vi_(std::move(vi)), cfg_(cfg) {
    if (ir_.empty() || vi_.empty()) throw DataError("training needs IR and VI samples");
  }

  int iterations_per_epoch() const {
    const std::size_t len = std::max(ir_.size(), vi_.size());
    return static_cast<int>((len + cfg_.batch_size - 1) / cfg_.batch_size);
  }

  std::pair<DomainBatch<T>, DomainBatch<T>> batch(int epoch, int iteration) const {
    return {assemble(ir_, Domain::IR, epoch, iteration), assemble(vi_, Domain::VI, epoch, iteration)};
  }

 private:
  DomainBatch<T> assemble(const std::vector<Sample>& set, Domain d, int epoch, int iteration) const {
    const auto order = permutation(set.size(), d, epoch);
    std::vector<GrayImage> images;
    DomainBatch<T> b;
    b.domain = d;
    for (int k = 0; k < cfg_.batch_size; ++k) {
      const std::size_t pos = static_cast<std::size_t>(iteration) * cfg_.batch_size + k;
      const Sample& src = set[order[pos % set.size()]];
      std::seed_seq seq{static_cast<std::uint32_t>(cfg_.seed), static_cast<std::uint32_t>(cfg_.seed >> 32),
                        static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(iteration),
                        static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(d)};
      std::mt19937_64 rng(seq);
      Sample c = crop_with_object(src, cfg_.crop_size, rng);
      images.push_back(normalize(c.image));
      b.boxes.push_back(std::move(c.boxes));
    }
    b.images = to_tensor<T>(images);
    return b;
  }

  std::vector<std::size_t> permutation(std::size_t n, Domain d, int epoch) const {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::seed_seq seq{static_cast<std::uint32_t>(cfg_.seed), static_cast<std::uint32_t>(cfg_.seed >> 32),
                      static_cast<std::uint32_t>(epoch), 0x5eedu + static_cast<std::uint32_t>(d)};
    std::mt19937_64 rng(seq);
    std::shuffle(order.begin(), order.end(), rng);
    return order;
  }

  std::vector<Sample> ir_;
  std::vector<Sample> vi_;
  TrainConfig cfg_;
};

struct TrainOptions {
  std::optional<std::filesystem::path> resume_from;
  /// Stop after this many epochs in this call (for staged runs); nullopt runs to the end.
  std::optional<int> max_epochs;
  std::function<void(int epoch, long iteration, const LossReport&)> on_step;
};

namespace detail {

inline void write_metrics_header(std::ostream& out) {
  out << "iteration,epoch";
  for (const char* c : LossReport::kColumns) out << ',' << c;
  out << '\n';
}

/// Keeps the header and rows with iteration < `keep_below`.
inline void truncate_metrics(const std::filesystem::path& path, long keep_below) {
  std::vector<std::string> kept;
  {
    std::ifstream in(path);
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
      if (header) {
        header = false;
        continue;
      }
      if (line.empty()) continue;
      if (std::stol(line.substr(0, line.find(','))) < keep_below) kept.push_back(line);
    }
  }
  std::ofstream out(path, std::ios::trunc);
  write_metrics_header(out);
  for (const auto& l : kept) out << l << '\n';
}

}  // namespace detail

inline std::filesystem::path epoch_checkpoint_path(const std::filesystem::path& out_dir, int epoch) {
  std::ostringstream name;
  name << "epoch_" << std::setw(4) << std::setfill('0') << epoch << ".ckpt";
  return out_dir / "checkpoints" / name.str();
}

/// Runs the schedule over in-memory samples; returns the final checkpoint path.
template <typename T>
std::filesystem::path train(const TrainConfig& cfg, std::vector<Sample> ir, std::vector<Sample> vi,
                            const std::filesystem::path& out_dir, const TrainOptions& options = {}) {
  cfg.validate();
  TrainState<T> s = options.resume_from ? load_checkpoint<T>(*options.resume_from)
                                        : TrainState<T>::create(cfg);
  const TrainConfig& run = s.config;
  BatchSource<T> source(std::move(ir), std::move(vi), run);
  std::filesystem::create_directories(out_dir);
  const auto metrics_path = out_dir / "metrics.csv";
  if (options.resume_from && std::filesystem::exists(metrics_path)) {
    detail::truncate_metrics(metrics_path, s.iteration);
  } else {
    std::ofstream fresh(metrics_path, std::ios::trunc);
    detail::write_metrics_header(fresh);
  }
  std::ofstream metrics(metrics_path, std::ios::app);
  metrics << std::setprecision(17);

  const int total = run.total_epochs();
  const int stop = options.max_epochs ? std::min(total, s.epoch + *options.max_epochs) : total;
  std::filesystem::path last;
  for (int epoch = s.epoch; epoch < stop; ++epoch) {
    const double lr = lr_at(epoch, run);
    for (int it = 0; it < source.iterations_per_epoch(); ++it) {
      auto [x, y] = source.batch(epoch, it);
      const LossReport r = train_step(s, x, y, lr);
      metrics << (s.iteration - 1) << ',' << epoch;
      for (double v : r.values()) metrics << ',' << v;
      metrics << '\n';
      if (options.on_step) options.on_step(epoch, s.iteration - 1, r);
    }
    metrics.flush();
    s.epoch = epoch + 1;
    if (s.epoch % run.checkpoint_every == 0 || s.epoch == total || s.epoch == stop) {
      last = epoch_checkpoint_path(out_dir, s.epoch);
      save_checkpoint(s, last);
    }
  }
  if (last.empty()) {
    last = epoch_checkpoint_path(out_dir, s.epoch);
    save_checkpoint(s, last);
  }
  if (s.epoch == total) {
    const auto final_path = out_dir / "final.ckpt";
    std::filesystem::copy_file(last, final_path, std::filesystem::copy_options::overwrite_existing);
    return final_path;
  }
  return last;
}

/// Manifest-driven entry point.
template <typename T>
std::filesystem::path train(const TrainConfig& cfg, const std::filesystem::path& ir_manifest,
                            const std::filesystem::path& vi_manifest,
                            const std::filesystem::path& out_dir, const TrainOptions& options = {}) {
  return train<T>(cfg, load_domain(read_manifest(ir_manifest), Domain::IR),
                  load_domain(read_manifest(vi_manifest), Domain::VI), out_dir, options);
}

}  // namespace thermvis
