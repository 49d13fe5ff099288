#pragma once

// Seedable random rotations (Arvo's construction), synthetic orientation
// tensors and fiber directions.

#include <cstdint>
#include <vector>

#include "tta/tensor.hpp"

namespace tta {

/// Counter-based SplitMix64 stream.
///
/// Output k of a stream is a pure function of (key, k), where the key is
/// derived from the seed and the chain of substream indices. Two streams built
/// from equal seeds and split paths produce bitwise-equal sequences, and
/// substreams can be handed to independent workers without coordination.
class RotationStream {
 public:
  explicit RotationStream(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  /// Independent child stream for `index`; does not advance this stream.
  RotationStream split(std::uint64_t index) const;

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double next_uniform();
  /// Standard normal (Box-Muller; consumes two uniforms).
  double next_normal();

 private:
  RotationStream(std::uint64_t seed, std::uint64_t key) : seed_(seed), key_(key) {}

  std::uint64_t seed_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t z);

/// Haar-uniform rotation; consumes three uniforms.
Rotation3 sample_rotation(RotationStream& stream);

Rotation3 identity_rotation();

/// [I, R_1, ..., R_n]. The list for n is a prefix of the list for n' > n.
std::vector<Rotation3> rotation_list(RotationStream& stream, std::size_t n);

struct FiberDirection {
  Vec3 p{};
  double theta = 0.0;  ///< angle from the x3 axis
  double phi = 0.0;
};

FiberDirection fiber_from_angles(double theta, double phi);

/// Random diagonal tensor (uniform on the simplex) conjugated by a random
/// rotation. Satisfies the orientation-tensor invariants.
SymTensor3 sample_orientation_tensor(RotationStream& stream);

/// As above; `spectrum` receives the sampled diagonal before rotation.
SymTensor3 sample_orientation_tensor(RotationStream& stream, Vec3& spectrum);

inline constexpr double kMinVolumeFraction = 0.10;
inline constexpr double kMaxVolumeFraction = 0.15;

/// Uniform in [0.10, 0.15].
double sample_volume_fraction(RotationStream& stream);

}  // namespace tta
