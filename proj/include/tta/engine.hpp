#pragma once

// Test-time augmentation: rotate the input, predict, rotate the prediction
// back, then aggregate the back-rotated predictions into a mean path with a
// per-step spread.

#include <cstdint>
#include <span>
#include <vector>

#include "tta/models.hpp"
#include "tta/rotation_sampler.hpp"
#include "tta/sample.hpp"

namespace tta {

/// Divisor used for the per-step mean of N+1 predictions.
enum class DivisorMode {
  count,           ///< N + 1, an ordinary mean
  paper_verbatim,  ///< N, the sum over i = 0..N divided by the rotation count
};

struct TTAConfig {
  std::size_t n_rotations = 0;
  std::uint64_t seed = 0;
  bool include_identity = true;
  DivisorMode divisor = DivisorMode::count;
  /// Spread over i = 0..N with divisor N+1 instead of i = 1..N with divisor N.
  bool sd_include_identity = false;

  void validate() const;
};

/// Options shared by the aggregation primitives.
struct AggregationOptions {
  DivisorMode divisor = DivisorMode::count;
  bool sd_include_identity = false;
  /// Whether predictions[0] is the unrotated (i = 0) prediction.
  bool leading_identity = true;
};

struct TTAResult {
  std::vector<TensorPath> predictions;  ///< back-rotated, rotation index order
  TensorPath aggregated;
  std::vector<Voigt6> sd;
  std::vector<Series> vm_individual;
  Series vm_aggregated;  ///< von Mises of `aggregated`
  Series vm_sd;

  std::size_t steps() const { return aggregated.size(); }
};

/// a <- r a r^T and every strain step likewise; vf unchanged.
ModelInput rotate_input(const ModelInput& input, const Rotation3& r);

/// Rotation list for a config: [I, R_1..R_N], or [R_1..R_N] without identity.
std::vector<Rotation3> rotations_for(const TTAConfig& cfg);

/// Back-rotated predictions, one per rotation, in order. Parallel across
/// rotations when the model allows concurrent calls.
std::vector<TensorPath> back_rotated_predictions(const Model& model, const ModelInput& input,
                                                 std::span<const Rotation3> rotations);

TTAResult run_tta(const Model& model, const ModelInput& input, const TTAConfig& cfg);
TTAResult run_tta(const Model& model, const ModelInput& input, std::span<const Rotation3> rotations,
                  const AggregationOptions& options);
/// Fills every aggregate field from ready back-rotated predictions.
TTAResult summarize(std::vector<TensorPath> predictions, const AggregationOptions& options);

/// Per-step, per-component mean. Throws InvalidArgument on empty input,
/// mismatched lengths, or paper_verbatim with no rotated predictions.
TensorPath aggregate_mean(std::span<const TensorPath> predictions, DivisorMode mode,
                          bool leading_identity = true);

/// sqrt(sum_i (sigma_i - sigma_TTA)^2 / n) per step and component, summed over
/// the rotated predictions only unless `options.sd_include_identity`.
std::vector<Voigt6> pointwise_sd(std::span<const TensorPath> predictions, const TensorPath& aggregated,
                                 const AggregationOptions& options = {});

Series von_mises_sd(std::span<const Series> vm_individual, const Series& vm_aggregated,
                    const AggregationOptions& options = {});

struct AuditReport {
  double input_err = 0.0;
  double target_err = 0.0;
  double output_err = 0.0;
  std::size_t samples = 0;
  std::size_t samples_with_target = 0;
};

/// Mean over samples of max_t |x(t) - R^T (R x(t) R^T) R| for the inputs
/// (a and strain), the target stress and the model output. One rotation is
/// drawn per sample; `identity_only` replaces it with I.
AuditReport numerics_audit(std::span<const Sample> dataset, const Model& model, RotationStream& stream,
                           bool identity_only = false);

}  // namespace tta
