#include "tta/experiment.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include <spdlog/spdlog.h>

#include "tta/dataset.hpp"
#include "tta/errors.hpp"
#include "tta/format.hpp"
#include "tta/sphere_map.hpp"

namespace tta {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;
using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Model selection

ModelSpec ModelSpec::parse(const std::string& text) {
  ModelSpec spec;
  if (text == "equivariant") {
    spec.kind = Kind::equivariant;
  } else if (text == "noisy") {
    spec.kind = Kind::noisy;
  } else if (text.rfind("external:", 0) == 0 && text.size() > 9) {
    spec.kind = Kind::external;
    spec.command = text.substr(9);
  } else {
    throw ConfigError("unknown model '" + text + "' (expected equivariant, noisy or external:<cmd>)");
  }
  return spec;
}

std::string ModelSpec::describe() const {
  switch (kind) {
    case Kind::equivariant:
      return "equivariant";
    case Kind::noisy:
      return "noisy";
    case Kind::external:
      return "external:" + command;
  }
  return {};
}

std::unique_ptr<Model> make_model(const ModelSpec& spec) {
  try {
    switch (spec.kind) {
      case ModelSpec::Kind::equivariant: {
        OracleParams p = spec.params;
        p.noise_amp = 0.0;
        return std::make_unique<EquivariantOracle>(p);
      }
      case ModelSpec::Kind::noisy:
        if (!(spec.params.noise_amp > 0.0)) throw ConfigError("noisy model needs a positive noise amplitude");
        return std::make_unique<NoisyOracle>(spec.params);
      case ModelSpec::Kind::external:
        return std::make_unique<ExternalModel>(
            ExternalModelConfig{spec.command, std::chrono::milliseconds(spec.timeout_ms)});
    }
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  throw ConfigError("unsupported model kind");
}

// ---------------------------------------------------------------------------
// Config

TTAConfig ExperimentConfig::tta() const {
  return TTAConfig{rotations, seed, include_identity, divisor, sd_include_identity};
}

AggregationOptions ExperimentConfig::aggregation() const {
  return AggregationOptions{divisor, sd_include_identity, include_identity};
}

void ExperimentConfig::validate() const {
  try {
    tta().validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  if (dataset.empty()) throw ConfigError("no dataset given");
  if (!fs::exists(dataset)) throw ConfigError("dataset " + dataset.string() + " does not exist");
  if (!(metrics.bin_width > 0.0)) throw ConfigError("bin width must be positive");
  if (!(metrics.eps_div > 0.0)) throw ConfigError("division guard must be positive");
  if (sphere.width == 0 || sphere.height == 0) throw ConfigError("grid dimensions must be >= 1");
  if (!(sphere.radius > 0.0)) throw ConfigError("radius must be positive");
  try {
    sphere::parse_colormap(sphere.colormap);
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
}

namespace {

const char* divisor_name(DivisorMode m) { return m == DivisorMode::count ? "count" : "paper"; }

DivisorMode parse_divisor(const std::string& s) {
  if (s == "count") return DivisorMode::count;
  if (s == "paper" || s == "paper_verbatim") return DivisorMode::paper_verbatim;
  throw ConfigError("unknown divisor mode '" + s + "'");
}

}  // namespace

ojson ExperimentConfig::to_json() const {
  ojson m;
  m["kind"] = model.describe().substr(0, model.describe().find(':'));
  if (model.kind == ModelSpec::Kind::external) {
    m["command"] = model.command;
    m["timeout_ms"] = model.timeout_ms;
  } else {
    m["lambda"] = model.params.lambda;
    m["mu"] = model.params.mu;
    m["kappa"] = model.params.kappa;
    m["sigma_y"] = model.params.sigma_y;
    m["noise_amp"] = model.params.noise_amp;
    m["noise_seed"] = model.params.noise_seed;
  }
  ojson j;
  j["seed"] = seed;
  j["model"] = std::move(m);
  j["rotations"] = rotations;
  j["include_identity"] = include_identity;
  j["divisor"] = divisor_name(divisor);
  j["sd_include_identity"] = sd_include_identity;
  j["mare_abs"] = metrics.errors.mare_abs;
  j["mere_norm"] = metrics.errors.mere_norm == metrics::MereNormalization::paper ? "paper" : "rms";
  j["eps_div"] = metrics.eps_div;
  j["bin_width"] = metrics.bin_width;
  j["dataset"] = dataset.string();
  j["sphere_map"] = {{"enabled", sphere.enabled},
                     {"grid", {sphere.width, sphere.height}},
                     {"radius", sphere.radius},
                     {"colormap", sphere.colormap}};
  j["save_predictions"] = save_predictions;
  j["sweep_n"] = sweep_n;
  j["repeats"] = repeats;
  j["final_rotations"] = final_rotations;
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  try {
    // Accept a run manifest as well as a bare config.
    const json& cfg = j.contains("config") ? j.at("config") : j;
    c.seed = cfg.value("seed", c.seed);
    if (cfg.contains("model")) {
      const json& m = cfg.at("model");
      const std::string kind = m.value("kind", "equivariant");
      c.model = ModelSpec::parse(kind == "external" ? "external:" + m.at("command").get<std::string>() : kind);
      c.model.timeout_ms = m.value("timeout_ms", c.model.timeout_ms);
      c.model.params.lambda = m.value("lambda", c.model.params.lambda);
      c.model.params.mu = m.value("mu", c.model.params.mu);
      c.model.params.kappa = m.value("kappa", c.model.params.kappa);
      c.model.params.sigma_y = m.value("sigma_y", c.model.params.sigma_y);
      c.model.params.noise_amp = m.value("noise_amp", c.model.params.noise_amp);
      c.model.params.noise_seed = m.value("noise_seed", c.model.params.noise_seed);
    }
    c.rotations = cfg.value("rotations", c.rotations);
    c.include_identity = cfg.value("include_identity", c.include_identity);
    c.divisor = parse_divisor(cfg.value("divisor", std::string("count")));
    c.sd_include_identity = cfg.value("sd_include_identity", c.sd_include_identity);
    c.metrics.errors.mare_abs = cfg.value("mare_abs", c.metrics.errors.mare_abs);
    const std::string norm = cfg.value("mere_norm", std::string("paper"));
    if (norm != "paper" && norm != "rms") throw ConfigError("unknown mere_norm '" + norm + "'");
    c.metrics.errors.mere_norm = norm == "paper" ? metrics::MereNormalization::paper : metrics::MereNormalization::rms;
    c.metrics.eps_div = cfg.value("eps_div", c.metrics.eps_div);
    c.metrics.bin_width = cfg.value("bin_width", c.metrics.bin_width);
    if (cfg.contains("dataset")) c.dataset = cfg.at("dataset").get<std::string>();
    if (cfg.contains("out")) c.out = cfg.at("out").get<std::string>();
    if (cfg.contains("sphere_map")) {
      const json& s = cfg.at("sphere_map");
      c.sphere.enabled = s.value("enabled", c.sphere.enabled);
      if (s.contains("grid")) {
        c.sphere.width = s.at("grid").at(0).get<std::size_t>();
        c.sphere.height = s.at("grid").at(1).get<std::size_t>();
      }
      c.sphere.radius = s.value("radius", c.sphere.radius);
      c.sphere.colormap = s.value("colormap", c.sphere.colormap);
    }
    c.save_predictions = cfg.value("save_predictions", c.save_predictions);
    if (cfg.contains("sweep_n")) c.sweep_n = cfg.at("sweep_n").get<std::vector<std::size_t>>();
    c.repeats = cfg.value("repeats", c.repeats);
    c.final_rotations = cfg.value("final_rotations", c.final_rotations);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  return c;
}

// ---------------------------------------------------------------------------
// Files

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 failed");
  }
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return os.str();
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << content;
  if (!out) throw Error("failed writing " + path.string());
}

// Write-then-rename so readers never see a half-written file.
void write_file_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  write_file(tmp, content);
  fs::rename(tmp, path);
}

ojson path_json(const TensorPath& p) {
  ojson arr = ojson::array();
  for (const auto& x : p) arr.push_back(x.voigt());
  return arr;
}

}  // namespace

std::string sha256_file(const fs::path& path) { return sha256_hex(read_file(path)); }

std::vector<Sample> load_evaluation_dataset(const ExperimentConfig& config) {
  auto dataset = load_dataset(config.dataset);
  for (const auto& s : dataset) {
    if (!s.target) throw InvariantViolation("sample '" + s.id + "' has no target stress path");
  }
  const std::size_t steps = dataset.front().input.strain.size();
  for (const auto& s : dataset) {
    if (s.input.strain.size() != steps) {
      throw InvariantViolation("sample '" + s.id + "' has a different number of steps than the first sample");
    }
  }
  return dataset;
}

// ---------------------------------------------------------------------------
// Runs

namespace {

std::vector<TensorPath> targets_of(const std::vector<Sample>& dataset) {
  std::vector<TensorPath> out;
  out.reserve(dataset.size());
  for (const auto& s : dataset) out.push_back(*s.target);
  return out;
}

std::vector<TTAResult> run_all(const std::vector<Sample>& dataset, const Model& model,
                               std::span<const Rotation3> rotations, const AggregationOptions& aggregation) {
  std::vector<TTAResult> results;
  results.reserve(dataset.size());
  for (const auto& s : dataset) {
    try {
      results.push_back(run_tta(model, s.input, rotations, aggregation));
    } catch (const ExternalModelError& e) {
      throw ExternalModelError(e.kind(), "sample '" + s.id + "', " + e.what());
    }
  }
  return results;
}

}  // namespace

RunResult evaluate_dataset(const std::vector<Sample>& dataset, const Model& model, const ExperimentConfig& config) {
  if (!config.include_identity) {
    throw ConfigError("dataset metrics need the identity prediction (include_identity = true)");
  }
  RunResult r;
  r.rotations = rotations_for(config.tta());
  r.results = run_all(dataset, model, r.rotations, config.aggregation());
  r.report = metrics::evaluate(r.results, targets_of(dataset), config.metrics);
  return r;
}

RunResult cmd_run(const ExperimentConfig& config) {
  config.validate();
  if (config.out.empty()) throw ConfigError("no output directory given");
  const auto dataset = load_evaluation_dataset(config);
  const auto model = make_model(config.model);
  spdlog::info("running TTA: {} samples, N = {}, model {}", dataset.size(), config.rotations,
               config.model.describe());
  RunResult run = evaluate_dataset(dataset, *model, config);

  const fs::path out = fs::absolute(config.out);
  if (fs::exists(out) && !fs::is_empty(out) && !fs::exists(out / "manifest.json")) {
    throw ConfigError("output directory " + out.string() + " exists and is not a previous run");
  }
  const fs::path stage = out.parent_path() / (out.filename().string() + ".partial");
  fs::remove_all(stage);
  fs::create_directories(stage);
  try {
    const std::uint64_t seed = config.seed;
    const auto& rep = run.report;
    write_file(stage / "metrics.json", metrics::to_json(rep, seed));
    write_file(stage / "metrics.txt", metrics::to_text(rep));

    std::string results;
    for (std::size_t m = 0; m < dataset.size(); ++m) {
      const TTAResult& r = run.results[m];
      ojson j;
      j["id"] = dataset[m].id;
      j["seed"] = seed;
      j["aggregated"] = path_json(r.aggregated);
      j["sd"] = r.sd;
      j["vm_aggregated"] = r.vm_aggregated;
      j["vm_sd"] = r.vm_sd;
      j["prediction_i0"] = path_json(r.predictions.front());
      j["vm_i0"] = r.vm_individual.front();
      if (config.save_predictions) {
        ojson preds = ojson::array();
        for (const auto& p : r.predictions) preds.push_back(path_json(p));
        j["predictions"] = std::move(preds);
      }
      results += j.dump() + "\n";
    }
    write_file(stage / "tta_results.jsonl", results);

    std::string per_rot = "i,mere,mare,x,y,z\n";
    for (std::size_t i = 0; i < rep.mere_per_rotation.size(); ++i) {
      const Vec3 p = run.rotations[i].apply(Vec3{0.0, 0.0, 1.0});
      per_rot += std::to_string(i) + "," + format_double(rep.mere_per_rotation[i]) + "," +
                 format_double(rep.mare_per_rotation[i]) + "," + format_double(p[0]) + "," + format_double(p[1]) +
                 "," + format_double(p[2]) + "\n";
    }
    write_file(stage / "mere_per_rotation.csv", per_rot);
    if (rep.histogram) write_file(stage / "mere_histogram.csv", metrics::histogram_csv(*rep.histogram));

    if (rep.uncertainty) {
      const auto& u = *rep.uncertainty;
      write_file(stage / "sd_mean.csv", metrics::curve_csv(u.sd_mean));
      write_file(stage / "eabs_mean.csv", metrics::curve_csv(u.eabs_mean));
      write_file(stage / "er_mean.csv", metrics::curve_csv(u.er_mean, u.relative_steps));
      write_file(stage / "sdr_mean.csv", metrics::curve_csv(u.sdr_mean, u.relative_steps));
    }
    if (rep.shape) {
      std::string shape = "sample,channel,c_ratio,r_i0,r_tta\n";
      for (const auto& e : rep.shape->entries) {
        shape += dataset[e.sample].id + "," + metrics::kShapeChannels[e.channel] + ",";
        if (e.ratio) {
          shape += (e.ratio->perfect_tta_shape ? std::string("inf") : format_double(e.ratio->value)) + "," +
                   format_double(e.ratio->r_i0) + "," + format_double(e.ratio->r_tta) + "\n";
        } else {
          shape += "degenerate,,\n";
        }
      }
      write_file(stage / "shape.csv", shape);
    }
    if (config.sphere.enabled) {
      const auto seeds = sphere::project_rotations(run.rotations, rep.mere_per_rotation, config.sphere.radius);
      const auto grid = sphere::voronoi_rasterize(seeds, config.sphere.width, config.sphere.height,
                                                  config.sphere.radius);
      sphere::export_map(grid, seeds, sphere::parse_colormap(config.sphere.colormap), stage / "sphere_map.svg",
                         stage / "sphere_seeds.csv");
    }

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(stage)) files.push_back(entry.path().filename());
    std::sort(files.begin(), files.end());
    ojson outputs;
    for (const auto& f : files) outputs[f.string()] = sha256_file(stage / f);
    ojson manifest;
    manifest["seed"] = seed;
    manifest["config"] = config.to_json();
    manifest["dataset_sha256"] = sha256_file(config.dataset);
    manifest["samples"] = dataset.size();
    manifest["outputs"] = std::move(outputs);
    write_file(stage / "manifest.json", manifest.dump(2) + "\n");

    fs::remove_all(out);
    fs::rename(stage, out);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(stage, ec);
    throw;
  }
  spdlog::info("MeRE_av {:.6g}, MeRE_TTA {:.6g}, written to {}", run.report.mere_av, run.report.mere_tta,
               out.string());
  return run;
}

AuditReport cmd_audit(const ExperimentConfig& config, bool identity_only) {
  config.validate();
  const auto dataset = load_dataset(config.dataset);
  const auto model = make_model(config.model);
  RotationStream stream(config.seed);
  return numerics_audit(dataset, *model, stream, identity_only);
}

std::string format_audit(const AuditReport& r) {
  std::ostringstream os;
  os << "Numerical round-trip error (mean over " << r.samples << " samples of max |x - R^T (R x R^T) R|)\n";
  os << std::left << std::setw(16) << "Input" << std::setw(16) << "Target" << "Output\n";
  os << std::scientific << std::setprecision(4) << std::setw(16) << r.input_err << std::setw(16);
  if (r.samples_with_target) {
    os << r.target_err;
  } else {
    os << "-";
  }
  os << r.output_err << "\n";
  os << "M = " << r.samples << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Sweeps and repeats

namespace {

// von Mises of the aggregate over predictions[0..n] (or the identity
// prediction alone for n = 0).
Series aggregated_vm(std::span<const TensorPath> predictions, std::size_t n, const AggregationOptions& aggregation) {
  if (n == 0) return von_mises_path(predictions.front());
  return von_mises_path(aggregate_mean(predictions.first(n + 1), aggregation.divisor, true));
}

}  // namespace

std::vector<SweepPoint> sweep(const std::vector<Sample>& dataset, const Model& model, std::uint64_t seed,
                              std::vector<std::size_t> n_values, const AggregationOptions& aggregation,
                              const metrics::ErrorOptions& errors) {
  if (n_values.empty()) throw ConfigError("sweep needs at least one rotation count");
  if (!aggregation.leading_identity) throw ConfigError("sweeps need the identity prediction");
  const std::size_t n_max = *std::max_element(n_values.begin(), n_values.end());
  RotationStream stream(seed);
  const auto rotations = rotation_list(stream, n_max);

  std::vector<std::vector<Series>> vm(n_values.size(), std::vector<Series>(dataset.size()));
  std::vector<Series> target_vm;
  for (std::size_t m = 0; m < dataset.size(); ++m) {
    target_vm.push_back(von_mises_path(*dataset[m].target));
    const auto preds = back_rotated_predictions(model, dataset[m].input, rotations);
    for (std::size_t k = 0; k < n_values.size(); ++k) vm[k][m] = aggregated_vm(preds, n_values[k], aggregation);
  }
  std::vector<SweepPoint> out;
  for (std::size_t k = 0; k < n_values.size(); ++k) {
    out.push_back({n_values[k], metrics::mere(target_vm, vm[k], errors.mere_norm),
                   metrics::mare(target_vm, vm[k], errors.mare_abs)});
  }
  return out;
}

std::string sweep_csv(const std::vector<SweepPoint>& points) {
  std::string out = "n,mere_tta,mare_tta\n";
  for (const auto& p : points) {
    out += std::to_string(p.n) + "," + format_double(p.mere_tta) + "," + format_double(p.mare_tta) + "\n";
  }
  return out;
}

std::vector<SweepPoint> cmd_sweep(const ExperimentConfig& config) {
  config.validate();
  if (config.out.empty()) throw ConfigError("no output directory given");
  const auto dataset = load_evaluation_dataset(config);
  const auto model = make_model(config.model);
  auto points = sweep(dataset, *model, config.seed, config.sweep_n, config.aggregation(), config.metrics.errors);
  fs::create_directories(config.out);
  write_file_atomic(config.out / "sweep.csv", sweep_csv(points));
  return points;
}

RepeatsTable repeats(const std::vector<Sample>& dataset, const Model& model, std::uint64_t seed,
                     std::size_t n_rotations, std::size_t n_repeats, std::size_t final_rotations,
                     const AggregationOptions& aggregation, const metrics::ErrorOptions& errors) {
  if (n_repeats == 0) throw ConfigError("repeats must be >= 1");
  if (!aggregation.leading_identity) throw ConfigError("repeats need the identity prediction");
  std::vector<Series> target_vm;
  for (const auto& s : dataset) target_vm.push_back(von_mises_path(*s.target));

  const RotationStream base(seed);
  auto evaluate = [&](RotationStream stream, std::size_t n) {
    const auto rotations = rotation_list(stream, n);
    std::vector<Series> vm_i0(dataset.size()), vm_tta(dataset.size());
    for (std::size_t m = 0; m < dataset.size(); ++m) {
      const auto preds = back_rotated_predictions(model, dataset[m].input, rotations);
      vm_i0[m] = von_mises_path(preds.front());
      vm_tta[m] = aggregated_vm(preds, n, aggregation);
    }
    return std::pair{vm_i0, vm_tta};
  };

  RepeatsTable table;
  for (std::size_t k = 1; k <= n_repeats; ++k) {
    const auto [vm_i0, vm_tta] = evaluate(base.split(k), n_rotations);
    table.mere.push_back(metrics::mere(target_vm, vm_tta, errors.mere_norm));
    table.mare.push_back(metrics::mare(target_vm, vm_tta, errors.mare_abs));
    if (k == 1) {
      table.mere_initial = metrics::mere(target_vm, vm_i0, errors.mere_norm);
      table.mare_initial = metrics::mare(target_vm, vm_i0, errors.mare_abs);
    }
  }
  if (final_rotations > 0) {
    const auto [vm_i0, vm_tta] = evaluate(base.split(0), final_rotations);
    table.mere_final = metrics::mere(target_vm, vm_tta, errors.mere_norm);
    table.mare_final = metrics::mare(target_vm, vm_tta, errors.mare_abs);
  }
  return table;
}

std::string repeats_csv(const RepeatsTable& t) {
  std::string out = "metric";
  for (std::size_t k = 1; k <= t.mere.size(); ++k) out += ",repeat_" + std::to_string(k);
  out += ",initial,final\n";
  auto row = [&](const char* name, const std::vector<double>& values, double initial,
                 const std::optional<double>& final_value) {
    out += name;
    for (double v : values) out += "," + format_double(v);
    out += "," + format_double(initial) + "," + (final_value ? format_double(*final_value) : std::string()) + "\n";
  };
  row("MeRE", t.mere, t.mere_initial, t.mere_final);
  row("MaRE", t.mare, t.mare_initial, t.mare_final);
  return out;
}

RepeatsTable cmd_repeats(const ExperimentConfig& config) {
  config.validate();
  if (config.out.empty()) throw ConfigError("no output directory given");
  const auto dataset = load_evaluation_dataset(config);
  const auto model = make_model(config.model);
  auto table = repeats(dataset, *model, config.seed, config.rotations, config.repeats, config.final_rotations,
                       config.aggregation(), config.metrics.errors);
  fs::create_directories(config.out);
  write_file_atomic(config.out / "repeats.csv", repeats_csv(table));
  return table;
}

void cmd_sphere_map(const ExperimentConfig& config) {
  config.validate();
  if (config.out.empty()) throw ConfigError("no output directory given");
  const auto dataset = load_evaluation_dataset(config);
  const auto model = make_model(config.model);
  const RunResult run = evaluate_dataset(dataset, *model, config);
  const auto seeds = sphere::project_rotations(run.rotations, run.report.mere_per_rotation, config.sphere.radius);
  const auto grid = sphere::voronoi_rasterize(seeds, config.sphere.width, config.sphere.height, config.sphere.radius);
  fs::create_directories(config.out);
  write_file_atomic(config.out / "sphere_map.svg",
                    sphere::render_svg(grid, seeds, sphere::parse_colormap(config.sphere.colormap)));
  write_file_atomic(config.out / "sphere_seeds.csv", sphere::seeds_csv(seeds));
}

}  // namespace tta
