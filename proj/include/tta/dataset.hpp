#pragma once

// Newline-delimited JSON datasets, one sample per line:
//   {"id": "...", "a": [6], "vf": x, "eps": [[6] x T], "sigma": [[6] x T]}
// "sigma" is optional. Component order and shear convention follow the
// tensor module.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "tta/models.hpp"
#include "tta/rotation_sampler.hpp"
#include "tta/sample.hpp"

namespace tta {

/// Throws ParseError (malformed content) or InvariantViolation (bad values),
/// both naming the line and, where known, the sample id and field.
std::vector<Sample> load_dataset(const std::filesystem::path& path);
std::vector<Sample> parse_dataset(std::istream& in);

void save_dataset(const std::filesystem::path& path, const std::vector<Sample>& samples);
std::string serialize_sample(const Sample& sample);

struct SyntheticOptions {
  std::size_t count = 1;      ///< M
  std::size_t steps = 100;    ///< T
  double max_strain = 0.02;   ///< largest |component| over each path
  double drift_scale = 1.0;   ///< drift components uniform in [-drift_scale, drift_scale]
  double noise_scale = 0.25;  ///< per-step standard normal noise multiplier
  bool uniaxial = false;      ///< cyclic eps11: 0 -> +peak -> -peak -> 0
  double uniaxial_peak = 0.035;
  OracleParams truth{};       ///< ground-truth oracle for the targets
};

/// Sample m draws from stream.split(m), so each sample is independent of M
/// and of generation order.
std::vector<Sample> generate_synthetic(const SyntheticOptions& options, const RotationStream& stream);

/// Cyclic uniaxial eps11 path of `steps` >= 5 points; both peaks land on a step.
TensorPath uniaxial_cycle(std::size_t steps, double peak);

}  // namespace tta
