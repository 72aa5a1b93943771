// vderain: train, apply and evaluate the video derainer; simulate rain; fit a
// rain generator to a standalone rain layer.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vderain/commands.hpp"

using namespace vderain;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::string checkpoint, input, output;
  long long seed = -1;
};

void add_config_flags(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON config file");
  cmd->add_option("--set", c.sets, "override key=value (dotted keys, repeatable)");
  cmd->add_option("--seed", c.seed, "random seed");
}

ConfigFile resolve(const Common& c, bool require_data) {
  std::vector<std::string> sets = c.sets;
  if (c.seed >= 0) sets.push_back("seed=" + std::to_string(c.seed));
  if (!c.output.empty()) sets.push_back("data.output=" + Json(c.output).dump());
  return load_config(c.config, sets, require_data);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semi-supervised video deraining"};
  app.require_subcommand(1);
  Common c;

  auto* train = app.add_subcommand("train", "EM training of the derainer");
  add_config_flags(train, c);
  train->add_option("--checkpoint", c.checkpoint, "resume from this checkpoint");
  train->add_option("--output", c.output, "run directory (overrides data.output)");

  auto* derain = app.add_subcommand("derain", "apply a trained derainer");
  derain->add_option("--checkpoint", c.checkpoint, "checkpoint archive")->required();
  derain->add_option("--input", c.input, "rainy frame dir or tensor file")->required();
  derain->add_option("--output", c.output, "output frame dir (or .tensor file)")->required();

  std::vector<std::string> pairs;
  auto* evaluate = app.add_subcommand("evaluate", "luminance PSNR/SSIM of restored clips");
  evaluate->add_option("--pair", pairs, "restored,reference (repeatable)")->required();
  evaluate->add_option("--output", c.output, "CSV path");

  RainRecipe recipe;
  std::size_t frames = 20, height = 64, width = 64;
  auto* sim = app.add_subcommand("simulate-rain", "render a procedural rain layer");
  sim->add_option("--seed", c.seed, "random seed");
  sim->add_option("--input", c.input, "clean clip to composite onto");
  sim->add_option("--output", c.output, "output dir")->required();
  sim->add_option("--frames", frames);
  sim->add_option("--height", height);
  sim->add_option("--width", width);
  sim->add_option("--direction", recipe.direction_deg, "degrees from vertical");
  sim->add_option("--speed", recipe.speed, "pixels per frame");
  sim->add_option("--density", recipe.density, "streaks per kilopixel");
  sim->add_option("--length", recipe.length);
  sim->add_option("--streak-width", recipe.width);
  sim->add_option("--intensity", recipe.intensity);
  sim->add_option("--jitter", recipe.jitter_deg, "direction noise std in degrees");

  std::size_t iterations = 2000;
  auto* fit = app.add_subcommand("fit-generator", "fit a dynamical generator to a rain layer");
  add_config_flags(fit, c);
  fit->add_option("--input", c.input, "rain frame dir or tensor file")->required();
  fit->add_option("--output", c.output, "output dir")->required();
  fit->add_option("--iterations", iterations);

  auto* init = app.add_subcommand("init", "write an identity checkpoint");
  add_config_flags(init, c);
  init->add_option("--output", c.output, "checkpoint path")->required();

  DeskSpec desk;
  auto* make = app.add_subcommand("make-dataset", "write the desk-scale synthetic dataset");
  make->add_option("--seed", c.seed, "random seed");
  make->add_option("--output", c.output, "dataset dir")->required();
  make->add_option("--labeled", desk.labeled);
  make->add_option("--unlabeled", desk.unlabeled);
  make->add_option("--validation", desk.validation);

  CLI11_PARSE(app, argc, argv);
  const std::string name = app.get_subcommands().front()->get_name();

  try {
    if (*train) {
      const ConfigFile cfg = resolve(c, true);
      cmd_train(cfg, c.checkpoint, &std::cout);
      std::cout << "wrote " << (fs::path(cfg.data.output) / "final.zip").string() << "\n";
    } else if (*derain) {
      cmd_derain(c.checkpoint, c.input, c.output);
    } else if (*evaluate) {
      std::vector<std::pair<std::string, std::string>> ps;
      for (const auto& p : pairs) {
        const auto comma = p.find(',');
        if (comma == std::string::npos) throw ConfigError("--pair expects restored,reference but got '" + p + "'");
        ps.emplace_back(p.substr(0, comma), p.substr(comma + 1));
      }
      for (const auto& r : cmd_evaluate(ps, c.output)) std::cout << r.name << " psnr " << r.psnr << " ssim " << r.ssim << "\n";
    } else if (*sim) {
      if (c.seed >= 0) recipe.seed = static_cast<std::uint64_t>(c.seed);
      cmd_simulate_rain(recipe, frames, height, width, c.input, c.output);
    } else if (*fit) {
      const std::string out = c.output;
      c.output.clear();
      const ConfigFile cfg = resolve(c, false);
      const auto res = cmd_fit_generator(c.input, cfg, iterations, out, &std::cout);
      std::cout << "final loss " << res.losses.back() << "\n";
    } else if (*init) {
      const std::string out = c.output;
      c.output.clear();
      cmd_init(resolve(c, false), out);
    } else if (*make) {
      if (c.seed >= 0) desk.seed = static_cast<std::uint64_t>(c.seed);
      std::cout << "wrote " << cmd_make_dataset(desk, c.output) << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "vderain " << name << ": error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
