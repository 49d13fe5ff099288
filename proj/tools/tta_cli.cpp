#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/cfg/env.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "tta/dataset.hpp"
#include "tta/errors.hpp"
#include "tta/experiment.hpp"
#include "tta/format.hpp"

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kData = 3, kExternal = 4 };

// Flags shared by the dataset commands. Only flags given on the command line
// override values loaded from --config.
struct CommonFlags {
  std::string config;
  std::uint64_t seed = 0;
  std::size_t rotations = 0;
  std::string model;
  std::string dataset;
  std::string out;
  bool mare_abs = false;
  std::string divisor;
  std::string grid;
  double radius = 0.0;
  double bin_width = 0.0;
  std::string colormap;
  double lambda = 0.0, mu = 0.0, kappa = 0.0, sigma_y = 0.0, noise_amp = 0.0;
  std::uint64_t noise_seed = 0;
  std::int64_t timeout_ms = 0;
  bool sd_include_identity = false;
  bool sphere_map = false;
  bool save_predictions = false;
  std::vector<std::size_t> n_values;
  std::size_t repeats = 0;
  std::size_t final_rotations = 0;

  std::map<std::string, CLI::Option*> opts;
};

void add_oracle_flags(CLI::App* cmd, CommonFlags& f) {
  f.opts["lambda"] = cmd->add_option("--lambda", f.lambda, "Oracle Lame lambda (MPa)");
  f.opts["mu"] = cmd->add_option("--mu", f.mu, "Oracle shear modulus (MPa)");
  f.opts["kappa"] = cmd->add_option("--kappa", f.kappa, "Oracle fiber coupling (MPa)");
  f.opts["sigma_y"] = cmd->add_option("--sigma-y", f.sigma_y, "Oracle von Mises cap (MPa)");
  f.opts["noise_amp"] = cmd->add_option("--noise-amp", f.noise_amp, "Noisy oracle amplitude (MPa)");
  f.opts["noise_seed"] = cmd->add_option("--noise-seed", f.noise_seed, "Noisy oracle noise seed");
}

void add_common_flags(CLI::App* cmd, CommonFlags& f) {
  f.opts["config"] = cmd->add_option("--config", f.config, "JSON config or run manifest")->check(CLI::ExistingFile);
  f.opts["seed"] = cmd->add_option("--seed", f.seed, "Master seed (64-bit unsigned)");
  f.opts["rotations"] = cmd->add_option("--rotations", f.rotations, "Number of random rotations N");
  f.opts["model"] = cmd->add_option("--model", f.model, "equivariant | noisy | external:<cmd>");
  f.opts["dataset"] = cmd->add_option("--dataset", f.dataset, "NDJSON dataset");
  f.opts["out"] = cmd->add_option("--out", f.out, "Output directory");
  f.opts["mare_abs"] = cmd->add_flag("--mare-abs", f.mare_abs, "Use |difference| in MaRE");
  f.opts["divisor"] = cmd->add_option("--divisor", f.divisor, "Mean divisor: count (N+1) or paper (N)")
                          ->check(CLI::IsMember({"count", "paper"}));
  f.opts["sd_include_identity"] =
      cmd->add_flag("--sd-include-identity", f.sd_include_identity, "Include i=0 in the SD sums");
  f.opts["grid"] = cmd->add_option("--grid", f.grid, "Sphere map raster size WxH");
  f.opts["radius"] = cmd->add_option("--radius", f.radius, "Mollweide radius R");
  f.opts["colormap"] = cmd->add_option("--colormap", f.colormap, "viridis | gray");
  f.opts["bin_width"] = cmd->add_option("--bin-width", f.bin_width, "MeRE histogram bin width");
  f.opts["timeout_ms"] = cmd->add_option("--timeout-ms", f.timeout_ms, "External model reply timeout");
  add_oracle_flags(cmd, f);
}

bool given(const CommonFlags& f, const std::string& name) {
  auto it = f.opts.find(name);
  return it != f.opts.end() && it->second->count() > 0;
}

std::pair<std::size_t, std::size_t> parse_grid(const std::string& text) {
  const auto x = text.find_first_of("xX");
  try {
    if (x == std::string::npos) throw std::invalid_argument(text);
    std::size_t w_end = 0, h_end = 0;
    const auto w = std::stoul(text.substr(0, x), &w_end);
    const auto h = std::stoul(text.substr(x + 1), &h_end);
    if (w_end != x || h_end != text.size() - x - 1 || w == 0 || h == 0) throw std::invalid_argument(text);
    return {w, h};
  } catch (const std::exception&) {
    throw tta::ConfigError("--grid expects WxH with positive integers, got '" + text + "'");
  }
}

tta::OracleParams apply_oracle_flags(const CommonFlags& f, tta::OracleParams p) {
  if (given(f, "lambda")) p.lambda = f.lambda;
  if (given(f, "mu")) p.mu = f.mu;
  if (given(f, "kappa")) p.kappa = f.kappa;
  if (given(f, "sigma_y")) p.sigma_y = f.sigma_y;
  if (given(f, "noise_amp")) p.noise_amp = f.noise_amp;
  if (given(f, "noise_seed")) p.noise_seed = f.noise_seed;
  return p;
}

tta::ExperimentConfig build_config(const CommonFlags& f) {
  tta::ExperimentConfig c;
  if (!f.config.empty()) {
    std::ifstream in(f.config);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw tta::ConfigError("cannot parse " + f.config + ": " + e.what());
    }
    c = tta::ExperimentConfig::from_json(j);
  }
  if (given(f, "model")) {
    const auto params = c.model.params;
    const auto timeout = c.model.timeout_ms;
    c.model = tta::ModelSpec::parse(f.model);
    c.model.params = params;
    c.model.timeout_ms = timeout;
  }
  c.model.params = apply_oracle_flags(f, c.model.params);
  if (given(f, "timeout_ms")) c.model.timeout_ms = f.timeout_ms;
  if (given(f, "seed")) c.seed = f.seed;
  if (given(f, "rotations")) c.rotations = f.rotations;
  if (given(f, "dataset")) c.dataset = f.dataset;
  if (given(f, "out")) c.out = f.out;
  if (given(f, "mare_abs")) c.metrics.errors.mare_abs = f.mare_abs;
  if (given(f, "divisor")) {
    c.divisor = f.divisor == "count" ? tta::DivisorMode::count : tta::DivisorMode::paper_verbatim;
  }
  if (given(f, "sd_include_identity")) c.sd_include_identity = f.sd_include_identity;
  if (given(f, "grid")) std::tie(c.sphere.width, c.sphere.height) = parse_grid(f.grid);
  if (given(f, "radius")) c.sphere.radius = f.radius;
  if (given(f, "colormap")) c.sphere.colormap = f.colormap;
  if (given(f, "bin_width")) c.metrics.bin_width = f.bin_width;
  if (given(f, "sphere_map")) c.sphere.enabled = f.sphere_map;
  if (given(f, "save_predictions")) c.save_predictions = f.save_predictions;
  if (given(f, "n_values")) c.sweep_n = f.n_values;
  if (given(f, "repeats")) c.repeats = f.repeats;
  if (given(f, "final_rotations")) c.final_rotations = f.final_rotations;
  return c;
}

int classify(const std::exception& e) {
  if (dynamic_cast<const tta::ConfigError*>(&e)) return kConfig;
  if (dynamic_cast<const tta::ExternalModelError*>(&e)) return kExternal;
  if (dynamic_cast<const tta::Error*>(&e)) return kData;
  return kFailure;
}

}  // namespace

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("tta");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::info);
  spdlog::cfg::load_env_levels();  // SPDLOG_LEVEL

  CLI::App app{"Test-time rotation augmentation for tensor-sequence predictors"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "Write a synthetic NDJSON dataset");
  tta::SyntheticOptions gen_opts;
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  CommonFlags gen_flags;
  gen->add_option("--seed", gen_seed, "Master seed");
  gen->add_option("--count", gen_opts.count, "Number of samples M")->check(CLI::PositiveNumber);
  gen->add_option("--steps", gen_opts.steps, "Steps per path T")->check(CLI::PositiveNumber);
  gen->add_option("--max-strain", gen_opts.max_strain, "Largest |strain component| per path");
  gen->add_option("--drift-scale", gen_opts.drift_scale, "Drift components uniform in [-s, s]");
  gen->add_option("--noise-scale", gen_opts.noise_scale, "Per-step normal noise multiplier");
  gen->add_flag("--uniaxial", gen_opts.uniaxial, "Cyclic uniaxial eps11 paths");
  gen->add_option("--uniaxial-peak", gen_opts.uniaxial_peak, "Peak strain of the uniaxial cycle");
  gen->add_option("--out", gen_out, "Output dataset file")->required();
  add_oracle_flags(gen, gen_flags);

  CommonFlags run_flags, audit_flags, sweep_flags, map_flags, rep_flags;
  bool identity_only = false;

  auto* run = app.add_subcommand("run", "TTA over a dataset with the full metric suite");
  add_common_flags(run, run_flags);
  run_flags.opts["sphere_map"] = run->add_flag("--sphere-map", run_flags.sphere_map, "Also write the sphere map");
  run_flags.opts["save_predictions"] =
      run->add_flag("--save-predictions", run_flags.save_predictions, "Keep every back-rotated prediction");

  auto* audit = app.add_subcommand("audit", "Round-trip rotation error report");
  add_common_flags(audit, audit_flags);
  audit->add_flag("--identity-only", identity_only, "Use the identity instead of a random rotation");

  auto* sw = app.add_subcommand("sweep", "MeRE_TTA and MaRE_TTA against N");
  add_common_flags(sw, sweep_flags);
  sweep_flags.opts["n_values"] = sw->add_option("--n-values", sweep_flags.n_values, "Rotation counts")->delimiter(',');

  auto* map = app.add_subcommand("sphere-map", "Per-rotation MeRE on a Mollweide map");
  add_common_flags(map, map_flags);

  auto* rep = app.add_subcommand("repeats", "MeRE_TTA / MaRE_TTA over repeated rotation draws");
  add_common_flags(rep, rep_flags);
  rep_flags.opts["repeats"] = rep->add_option("--repeats", rep_flags.repeats, "Number of repeats");
  rep_flags.opts["final_rotations"] =
      rep->add_option("--final-rotations", rep_flags.final_rotations, "Large-N reference (0 disables)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (gen->parsed()) {
      if (!(gen_opts.max_strain > 0.0)) throw tta::ConfigError("--max-strain must be positive");
      gen_opts.truth = apply_oracle_flags(gen_flags, gen_opts.truth);
      gen_opts.truth.noise_amp = 0.0;
      const auto dataset = tta::generate_synthetic(gen_opts, tta::RotationStream(gen_seed));
      tta::save_dataset(gen_out, dataset);
      spdlog::info("wrote {} samples to {}", dataset.size(), gen_out);
    } else if (run->parsed()) {
      const auto config = build_config(run_flags);
      const auto result = tta::cmd_run(config);
      std::cout << tta::metrics::to_text(result.report);
    } else if (audit->parsed()) {
      const auto config = build_config(audit_flags);
      std::cout << tta::format_audit(tta::cmd_audit(config, identity_only));
    } else if (sw->parsed()) {
      const auto points = tta::cmd_sweep(build_config(sweep_flags));
      std::cout << tta::sweep_csv(points);
    } else if (map->parsed()) {
      tta::cmd_sphere_map(build_config(map_flags));
    } else if (rep->parsed()) {
      std::cout << tta::repeats_csv(tta::cmd_repeats(build_config(rep_flags)));
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return classify(e);
  }
  return kOk;
}
