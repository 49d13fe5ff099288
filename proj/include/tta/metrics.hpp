#pragma once

// Dataset-level evaluation of TTA results: relative error families on von
// Mises paths, their distribution over rotations, shape consistency from
// first differences, and uncertainty-versus-error curves.

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tta/engine.hpp"
#include "tta/tensor.hpp"

namespace tta::metrics {

/// Division guard for relative quantities, MPa.
inline constexpr double kEpsDiv = 1e-9;

enum class MereNormalization {
  paper,  ///< sqrt(sum_t d^2) / (max_t target * T)
  rms,    ///< sqrt(sum_t d^2 / T) / max_t target
};

struct ErrorOptions {
  bool mare_abs = false;
  MereNormalization mere_norm = MereNormalization::paper;
};

/// Mean relative error over samples; targets[m] and predictions[m] are the
/// von Mises paths of sample m. Throws ZeroTargetMax, InvalidArgument.
double mere(std::span<const Series> targets, std::span<const Series> predictions,
            MereNormalization norm = MereNormalization::paper);

/// Mean over samples of max_t(target - prediction) / max_t target; the
/// difference is signed unless `abs_diff`.
double mare(std::span<const Series> targets, std::span<const Series> predictions, bool abs_diff = false);

/// Arithmetic mean of MeRE_0..MeRE_N.
double mere_av(std::span<const double> mere_values);

/// sqrt(1/N sum_{i=1..N} (MeRE_i - MeRE_av)^2); values[0] is the unrotated MeRE.
double sd_mere(std::span<const double> mere_values, double mere_average);

struct Histogram {
  double bin_width = 0.0;
  double origin = 0.0;          ///< left edge of bin 0
  std::vector<double> density;  ///< count / (n * bin_width)
  std::vector<std::size_t> counts;
  double fit_mean = 0.0;  ///< normal fit
  double fit_sd = 0.0;    ///< population SD (divisor n)

  double bin_left(std::size_t k) const { return origin + static_cast<double>(k) * bin_width; }
  double area() const;
  double normal_pdf(double x) const;
};

/// Density-normalized histogram plus a normal fit. Needs at least two values.
Histogram mere_histogram(std::span<const double> values, double bin_width);

/// Percentage of `population` strictly below `value`.
double percentile_of(double value, std::span<const double> population);

Series first_differences(std::span<const double> x);

/// Pearson correlation; throws DegenerateSequence on zero variance.
double pearson_r(std::span<const double> x, std::span<const double> y);

struct ShapeRatio {
  double value = 0.0;  ///< (1 - r_i0) / (1 - r_tta), or +inf
  double r_i0 = 0.0;
  double r_tta = 0.0;
  bool perfect_tta_shape = false;  ///< 1 - r_tta below 1e-12
};

/// Compares first-difference correlations of the unrotated and aggregated
/// paths against the target. Sequences need length >= 3.
ShapeRatio shape_ratio(std::span<const double> target, std::span<const double> i0,
                       std::span<const double> tta);

struct UncertaintyCurves {
  Series sd_mean;    ///< <SD>(t)
  Series eabs_mean;  ///< <E_abs>(t)
  std::vector<std::size_t> relative_steps;  ///< steps kept in the relative curves
  Series er_mean;    ///< <E_r>(t) over relative_steps
  Series sdr_mean;   ///< <SD_r>(t) over relative_steps
  std::size_t excluded_steps = 0;
  std::optional<double> r_abs;
  std::optional<double> r_rel;
  /// Per-component SD versus |error|, pooled over samples, components and steps.
  std::optional<double> r_component;
};

/// targets[m] is the target stress path of the sample that produced results[m].
UncertaintyCurves uncertainty_curves(std::span<const TTAResult> results, std::span<const TensorPath> targets,
                                     double eps_div = kEpsDiv);

/// Channel names for shape analysis: von Mises then the six components.
inline constexpr std::array<const char*, 7> kShapeChannels{"vm", "s11", "s22", "s33", "s12", "s13", "s23"};

struct ShapeEntry {
  std::size_t sample = 0;
  std::size_t channel = 0;
  std::optional<ShapeRatio> ratio;  ///< empty when degenerate
  std::string note;
};

struct ShapeSummary {
  std::vector<ShapeEntry> entries;
  double mean_ratio = 0.0;  ///< over finite ratios
  std::size_t finite = 0;
  std::size_t perfect = 0;
  std::size_t degenerate = 0;
  std::size_t below_one = 0;
};

struct ReportOptions {
  ErrorOptions errors;
  double eps_div = kEpsDiv;
  double bin_width = 1e-5;
};

struct MetricsReport {
  std::size_t samples = 0;
  std::size_t rotations = 0;  ///< N
  std::size_t steps = 0;      ///< T
  std::vector<double> mere_per_rotation;
  std::vector<double> mare_per_rotation;
  double mere_i0 = 0.0;
  double mare_i0 = 0.0;
  double mere_av = 0.0;
  std::optional<double> sd_mere;
  double mere_tta = 0.0;
  double mare_tta = 0.0;
  std::optional<double> mere_i0_percentile;
  std::optional<Histogram> histogram;
  std::optional<ShapeSummary> shape;
  std::optional<UncertaintyCurves> uncertainty;
  std::vector<std::string> notes;
};

/// Every metric over a dataset. results[m] must carry the identity prediction
/// at index 0.
MetricsReport evaluate(std::span<const TTAResult> results, std::span<const TensorPath> targets,
                       const ReportOptions& options = {});

std::string to_json(const MetricsReport& report, std::uint64_t seed);
std::string to_text(const MetricsReport& report);
/// CSV with header "t,value"; t is 1-based.
std::string curve_csv(const Series& values, std::span<const std::size_t> steps = {});
std::string histogram_csv(const Histogram& h);

}  // namespace tta::metrics
