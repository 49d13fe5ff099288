#pragma once

// End-to-end experiment runs driven by an ExperimentConfig: TTA over a
// dataset, metric reports, sweeps over the rotation count, repeat tables,
// numerics audits and sphere maps. Every random draw flows from `seed`.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tta/engine.hpp"
#include "tta/metrics.hpp"
#include "tta/models.hpp"
#include "tta/sample.hpp"

namespace tta {

struct ModelSpec {
  enum class Kind { equivariant, noisy, external };
  Kind kind = Kind::equivariant;
  OracleParams params{};
  std::string command;  ///< external only
  std::int64_t timeout_ms = 30000;

  /// "equivariant", "noisy" or "external:<command>"; throws ConfigError.
  static ModelSpec parse(const std::string& text);
  std::string describe() const;
};

std::unique_ptr<Model> make_model(const ModelSpec& spec);

struct SphereMapOptions {
  bool enabled = false;
  std::size_t width = 720;
  std::size_t height = 360;
  double radius = 2.0;
  std::string colormap = "viridis";
};

struct ExperimentConfig {
  ModelSpec model;
  std::size_t rotations = 0;
  std::uint64_t seed = 0;
  bool include_identity = true;
  DivisorMode divisor = DivisorMode::count;
  bool sd_include_identity = false;
  metrics::ReportOptions metrics;
  std::filesystem::path dataset;
  std::filesystem::path out;
  SphereMapOptions sphere;
  bool save_predictions = false;
  std::vector<std::size_t> sweep_n{0, 1, 2, 5, 10, 20, 50, 100, 200};
  std::size_t repeats = 5;
  std::size_t final_rotations = 1000;

  TTAConfig tta() const;
  AggregationOptions aggregation() const;

  /// Throws ConfigError; checks that the dataset exists.
  void validate() const;

  /// Everything needed to reproduce outputs; the output location is omitted.
  nlohmann::ordered_json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
};

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Loads the configured dataset and checks that every sample has a target.
std::vector<Sample> load_evaluation_dataset(const ExperimentConfig& config);

struct RunResult {
  std::vector<TTAResult> results;
  metrics::MetricsReport report;
  std::vector<Rotation3> rotations;
};

/// TTA and metrics for every sample, in memory.
RunResult evaluate_dataset(const std::vector<Sample>& dataset, const Model& model, const ExperimentConfig& config);

/// Writes the full run into config.out (staged in a sibling directory and
/// moved into place on success; nothing is left behind on failure).
RunResult cmd_run(const ExperimentConfig& config);

AuditReport cmd_audit(const ExperimentConfig& config, bool identity_only);
std::string format_audit(const AuditReport& report);

struct SweepPoint {
  std::size_t n = 0;
  double mere_tta = 0.0;
  double mare_tta = 0.0;
};

/// MeRE_TTA / MaRE_TTA at each N. All N share one rotation stream, so the
/// list for N is a prefix of the list for any larger N.
std::vector<SweepPoint> sweep(const std::vector<Sample>& dataset, const Model& model, std::uint64_t seed,
                              std::vector<std::size_t> n_values, const AggregationOptions& aggregation,
                              const metrics::ErrorOptions& errors);
std::vector<SweepPoint> cmd_sweep(const ExperimentConfig& config);
std::string sweep_csv(const std::vector<SweepPoint>& points);

struct RepeatsTable {
  std::vector<double> mere;  ///< MeRE_TTA per repeat
  std::vector<double> mare;
  double mere_initial = 0.0;  ///< MeRE_i=0
  double mare_initial = 0.0;
  std::optional<double> mere_final;  ///< large-N reference
  std::optional<double> mare_final;
};

/// Repeat k (1-based) draws its rotations from substream k of `seed`.
RepeatsTable repeats(const std::vector<Sample>& dataset, const Model& model, std::uint64_t seed,
                     std::size_t n_rotations, std::size_t n_repeats, std::size_t final_rotations,
                     const AggregationOptions& aggregation, const metrics::ErrorOptions& errors);
RepeatsTable cmd_repeats(const ExperimentConfig& config);
std::string repeats_csv(const RepeatsTable& table);

/// Per-rotation MeRE on the sphere; writes sphere_map.svg and sphere_seeds.csv.
void cmd_sphere_map(const ExperimentConfig& config);

}  // namespace tta
