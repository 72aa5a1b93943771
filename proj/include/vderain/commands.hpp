#pragma once

// Command implementations behind tools/vderain. Each returns normally on
// success and throws a vderain::Error with context otherwise.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "vderain/checkpoint.hpp"
#include "vderain/config.hpp"
#include "vderain/desk.hpp"
#include "vderain/frames_io.hpp"
#include "vderain/synthesis.hpp"
#include "vderain/tensor_io.hpp"
#include "vderain/training.hpp"

namespace vderain {

namespace fs = std::filesystem;

inline constexpr std::size_t kInferenceChunk = 20;

/// Loads `<dir>/<name>` as a frame directory, or `<dir>/<name>.tensor`.
inline VideoClip load_clip_part(const fs::path& dir, const std::string& name) {
  if (fs::is_directory(dir / name)) return load_frames_dir(dir / name);
  const fs::path t = dir / (name + ".tensor");
  if (fs::exists(t)) return load_clip(t);
  throw IoError("clip dir " + dir.string() + " has neither " + name + "/ nor " + name + ".tensor");
}

inline std::string clip_name(const std::string& dir) {
  fs::path p(dir);
  if (p.filename().empty()) p = p.parent_path();
  return p.filename().string();
}

// ---------------------------------------------------------------------------
// train

inline const char* kLogHeader = "epoch,batch_kind,mean_loss,val_psnr,val_ssim,lr_derainer,lr_transition,lr_emission,wall_seconds";

inline std::string log_row(const EpochLog& r) {
  std::ostringstream os;
  os << std::setprecision(10) << r.epoch << ',' << r.batch_kind << ',' << r.mean_loss << ',' << r.val_psnr << ',' << r.val_ssim
     << ',' << r.lr_derainer << ',' << r.lr_transition << ',' << r.lr_emission << ',' << r.wall_seconds;
  return os.str();
}

struct TrainInputs {
  Dataset data;
  std::vector<ClipSample> validation;
};

inline TrainInputs load_train_inputs(const ConfigFile& cfg) {
  std::vector<LabeledSource> lab;
  std::vector<UnlabeledSource> unl;
  for (const auto& d : cfg.data.labeled) lab.push_back({clip_name(d), load_clip_part(d, "rainy"), load_clip_part(d, "clean")});
  if (uses_unlabeled(cfg.train.mode))
    for (const auto& d : cfg.data.unlabeled) unl.push_back({clip_name(d), load_clip_part(d, "rainy")});
  TrainInputs in;
  in.data = build_dataset(lab, unl, cfg.dataset);
  for (const auto& d : cfg.data.validation) in.validation.push_back({clip_name(d), load_clip_part(d, "rainy"), load_clip_part(d, "clean")});
  return in;
}

/// Runs (or resumes) EM training. Writes resolved_config.json, train_log.csv,
/// checkpoint.zip after every epoch and final.zip at the end.
inline TrainState cmd_train(const ConfigFile& cfg, const std::string& resume = {}, std::ostream* progress = nullptr) {
  require_data_paths(cfg);
  const fs::path out(cfg.data.output);
  echo_config(cfg, out.string());
  const TrainInputs in = load_train_inputs(cfg);

  TrainState st;
  if (resume.empty()) {
    st = init_train_state(in.data, cfg.train);
  } else {
    Checkpoint ck = load_checkpoint(resume);
    if (to_json(ck.config).at("train") != to_json(cfg).at("train"))
      std::cerr << "warning: resuming with training settings that differ from the checkpoint\n";
    st = std::move(ck.state);
  }
  const fs::path log_path = out / "train_log.csv";
  const bool fresh = resume.empty() || !fs::exists(log_path);
  std::ofstream log(log_path, fresh ? std::ios::trunc : std::ios::app);
  if (!log) throw IoError("cannot write " + log_path.string());
  if (fresh) log << kLogHeader << "\n";

  em_train(in.data, st, cfg.train, in.validation, 0, [&](const std::vector<EpochLog>& rows) {
    for (const auto& r : rows) {
      log << log_row(r) << "\n";
      if (progress) *progress << "epoch " << r.epoch << " " << r.batch_kind << " loss " << r.mean_loss << " val_psnr " << r.val_psnr << "\n";
    }
    log.flush();
    save_checkpoint((out / "checkpoint.zip").string(), {cfg, st});
  });
  save_checkpoint((out / "final.zip").string(), {cfg, st});
  return st;
}

// ---------------------------------------------------------------------------
// derain

namespace detail {
/// Replicates the last row/column until h and w are multiples of r.
inline VideoClip pad_to_multiple(const VideoClip& clip, std::size_t r) {
  const std::size_t n = clip.dim(0), c = clip.dim(1), h = clip.dim(2), w = clip.dim(3);
  const std::size_t H = (h + r - 1) / r * r, W = (w + r - 1) / r * r;
  if (H == h && W == w) return clip;
  VideoClip out({n, c, H, W});
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) out.at(t, ch, y, x) = clip.at(t, ch, std::min(y, h - 1), std::min(x, w - 1));
  return out;
}

inline VideoClip crop_to(const VideoClip& clip, std::size_t h, std::size_t w) {
  if (clip.dim(2) == h && clip.dim(3) == w) return clip;
  const std::size_t n = clip.dim(0), c = clip.dim(1);
  VideoClip out({n, c, h, w});
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) out.at(t, ch, y, x) = clip.at(t, ch, y, x);
  return out;
}
}  // namespace detail

/// Derains a clip of any length in non-overlapping chunks of 20 frames
/// (the last chunk may be shorter), clamped to [0, 1].
inline VideoClip derain_video(const DerainerConfig& dcfg, const DerainerParams<float>& w, const VideoClip& rainy) {
  require_clip_shape(rainy, "derain");
  if (rainy.dim(1) != dcfg.channels)
    throw ShapeError("input has " + std::to_string(rainy.dim(1)) + " channels, the checkpoint expects " + std::to_string(dcfg.channels));
  const std::size_t n = rainy.dim(0), h = rainy.dim(2), wd = rainy.dim(3);
  VideoClip out(rainy.shape());
  const std::size_t frame = rainy.dim(1) * h * wd;
  for (std::size_t start = 0; start < n; start += kInferenceChunk) {
    const std::size_t len = std::min(kInferenceChunk, n - start);
    const VideoClip chunk = detail::pad_to_multiple(frame_range(rainy, start, len), dcfg.shuffle);
    const VideoClip d = detail::crop_to(derain_clip(dcfg, w, chunk), h, wd);
    std::copy(d.data(), d.data() + d.size(), out.data() + start * frame);
  }
  return out;
}

inline void cmd_derain(const std::string& checkpoint, const std::string& input, const std::string& output) {
  const Checkpoint ck = load_checkpoint(checkpoint);
  const VideoClip rainy = load_clip(input);
  const VideoClip out = derain_video(ck.config.train.derainer, ck.state.derainer, rainy);
  if (fs::path(output).extension() == ".tensor")
    write_tensor_container(output, out);
  else
    save_frames_dir(output, out);
}

// ---------------------------------------------------------------------------
// evaluate

struct EvalRow {
  std::string name;
  double psnr = 0, ssim = 0;
};

/// Each pair is (restored, reference). Writes per-clip rows and a "mean" row.
inline std::vector<EvalRow> cmd_evaluate(const std::vector<std::pair<std::string, std::string>>& pairs, const std::string& csv_path) {
  if (pairs.empty()) throw ValueError("evaluate: no clip pairs given");
  std::vector<EvalRow> rows;
  EvalRow mean{"mean"};
  for (const auto& [a, b] : pairs) {
    const VideoClip x = load_clip(a), y = load_clip(b);
    EvalRow r{clip_name(a), psnr_luminance(x, y), ssim_luminance(x, y)};
    mean.psnr += r.psnr;
    mean.ssim += r.ssim;
    rows.push_back(r);
  }
  mean.psnr /= static_cast<double>(rows.size());
  mean.ssim /= static_cast<double>(rows.size());
  rows.push_back(mean);
  if (!csv_path.empty()) {
    if (fs::path(csv_path).has_parent_path()) fs::create_directories(fs::path(csv_path).parent_path());
    std::ofstream f(csv_path);
    if (!f) throw IoError("cannot write " + csv_path);
    f << "clip,psnr,ssim\n" << std::setprecision(10);
    for (const auto& r : rows) f << r.name << ',' << r.psnr << ',' << r.ssim << "\n";
  }
  return rows;
}

// ---------------------------------------------------------------------------
// simulate-rain

/// Writes `<output>/rain` and, when a clean clip is given, `<output>/rainy`.
inline void cmd_simulate_rain(const RainRecipe& recipe, std::size_t frames, std::size_t height, std::size_t width,
                              const std::string& clean_input, const std::string& output) {
  VideoClip clean;
  if (!clean_input.empty()) {
    clean = load_clip(clean_input);
    frames = clean.dim(0);
    height = clean.dim(2);
    width = clean.dim(3);
  }
  const VideoClip rain = procedural_rain(recipe, frames, height, width);
  const fs::path out(output);
  save_frames_dir(out / "rain", rain);
  write_tensor_container((out / "rain.tensor").string(), rain);
  if (!clean_input.empty()) {
    const VideoClip rainy = composite_rainy(clean, rain);
    save_frames_dir(out / "rainy", rainy);
    write_tensor_container((out / "rainy.tensor").string(), rainy);
  }
}

// ---------------------------------------------------------------------------
// fit-generator

inline FitResult cmd_fit_generator(const std::string& rain_input, const ConfigFile& cfg, std::size_t iterations,
                                   const std::string& output, std::ostream* progress = nullptr) {
  VideoClip rain = load_clip(rain_input);
  if (rain.dim(1) == 3) rain = luminance_of(rain);
  FitConfig fc;
  fc.generator = cfg.train.generator;
  fc.langevin = cfg.train.langevin;
  fc.lr_transition = cfg.train.lr_transition;
  fc.lr_emission = cfg.train.lr_emission;
  fc.clip_norm = cfg.train.clip_norm;
  fc.iterations = iterations;
  fc.seed = cfg.seed;
  FitResult res = fit_generator(rain, fc, [&](std::size_t it, double loss) {
    if (progress && it % 100 == 0) *progress << "iteration " << it << " loss " << loss << "\n";
  });
  const fs::path out(output);
  fs::create_directories(out);
  save_frames_dir(out / "reconstruction", res.reconstruction);
  write_tensor_container((out / "reconstruction.tensor").string(), res.reconstruction);
  std::ofstream f(out / "fit_log.csv");
  f << "iteration,loss,data_loss\n" << std::setprecision(10);
  for (std::size_t i = 0; i < res.losses.size(); ++i) f << i + 1 << ',' << res.losses[i] << ',' << res.data_losses[i] << "\n";
  std::ofstream s(out / "summary.json");
  s << Json{{"psnr", psnr_luminance(res.reconstruction, rain)}, {"iterations", iterations}}.dump(2) << "\n";
  return res;
}

// ---------------------------------------------------------------------------
// init

/// A checkpoint whose derainer is the identity: zero final convolution plus
/// the global skip. No generators or chains.
inline void cmd_init(ConfigFile cfg, const std::string& output) {
  cfg.train.derainer.zero_tail = true;
  cfg.train.derainer.global_skip = true;
  cfg.train.validate();
  Checkpoint ck{cfg, {}};
  ck.state.derainer = init_params<float>(cfg.train.derainer, stream_seed(cfg.seed, "derainer"));
  ck.state.derainer.tail.bias.fill(0);
  ck.state.derainer_opt = AdamState<DerainerParams<float>>(ck.state.derainer);
  if (fs::path(output).has_parent_path()) fs::create_directories(fs::path(output).parent_path());
  save_checkpoint(output, ck);
}

// ---------------------------------------------------------------------------
// make-dataset

/// Writes the bundled desk-scale dataset as frame directories plus a
/// config.json that trains on it.
inline std::string cmd_make_dataset(const DeskSpec& spec, const std::string& output) {
  const DeskData d = make_desk_data(spec);
  const fs::path root = fs::absolute(output);
  ConfigFile cfg;
  auto write = [&](const std::vector<DeskClip>& clips, const char* group, bool with_clean, std::vector<std::string>& list) {
    for (const auto& c : clips) {
      const fs::path dir = root / group / c.name;
      save_frames_dir(dir / "rainy", c.rainy);
      if (with_clean) save_frames_dir(dir / "clean", c.clean);
      list.push_back(dir.string());
    }
  };
  write(d.labeled, "labeled", true, cfg.data.labeled);
  write(d.unlabeled, "unlabeled", false, cfg.data.unlabeled);
  write(d.validation, "validation", true, cfg.data.validation);
  cfg.data.output = (root / "run").string();
  cfg.seed = spec.seed;
  cfg.dataset.batch_size = 2;
  cfg.train.derainer.width = 8;
  cfg.train.derainer.blocks = 2;
  cfg.train.derainer.zero_tail = true;
  cfg.propagate_seed();
  const std::string path = (root / "config.json").string();
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);
  f << to_json(cfg).dump(2) << "\n";
  return path;
}

}  // namespace vderain
