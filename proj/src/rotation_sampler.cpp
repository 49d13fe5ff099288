#include "tta/rotation_sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace tta {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

}  // namespace

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

RotationStream::RotationStream(std::uint64_t seed) : seed_(seed), key_(mix64(seed + kGolden)) {}

RotationStream RotationStream::split(std::uint64_t index) const {
  return RotationStream(seed_, mix64(key_ ^ mix64(index + 0x632BE59BD9B4E019ULL)));
}

std::uint64_t RotationStream::next_u64() {
  ++counter_;
  return mix64(key_ + counter_ * kGolden);
}

double RotationStream::next_uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double RotationStream::next_normal() {
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - next_uniform();
  const double u2 = next_uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Rotation3 sample_rotation(RotationStream& stream) {
  const double x1 = stream.next_uniform();
  const double x2 = stream.next_uniform();
  const double x3 = stream.next_uniform();

  const double theta = 2.0 * std::numbers::pi * x1;  // rotation about the pole
  const double phi = 2.0 * std::numbers::pi * x2;    // direction of pole deflection
  const double z = x3;                               // amount of deflection

  const double ct = std::cos(theta), st = std::sin(theta);
  const Mat3 rz{{{ct, st, 0.0}, {-st, ct, 0.0}, {0.0, 0.0, 1.0}}};

  const double r = std::sqrt(z);
  const Vec3 v{std::cos(phi) * r, std::sin(phi) * r, std::sqrt(1.0 - z)};

  // (2 v v^T - I) R_z: minus a Householder reflection times a rotation, det +1.
  Mat3 m{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 3; ++k) {
        const double h = 2.0 * v[i] * v[k] - (i == k ? 1.0 : 0.0);
        acc += h * rz[k][j];
      }
      m[i][j] = acc;
    }
  }
  return Rotation3::from_matrix(m);
}

Rotation3 identity_rotation() { return Rotation3::identity(); }

std::vector<Rotation3> rotation_list(RotationStream& stream, std::size_t n) {
  std::vector<Rotation3> out;
  out.reserve(n + 1);
  out.push_back(identity_rotation());
  for (std::size_t i = 0; i < n; ++i) out.push_back(sample_rotation(stream));
  return out;
}

FiberDirection fiber_from_angles(double theta, double phi) {
  FiberDirection f;
  f.theta = theta;
  f.phi = phi;
  f.p = {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)};
  return f;
}

SymTensor3 sample_orientation_tensor(RotationStream& stream, Vec3& spectrum) {
  // Stick-breaking on two sorted uniforms gives a uniform point on the simplex.
  double u1 = stream.next_uniform();
  double u2 = stream.next_uniform();
  if (u1 > u2) std::swap(u1, u2);
  spectrum = {u1, u2 - u1, 1.0 - u2};
  const Rotation3 r = sample_rotation(stream);
  return rotate_sym(SymTensor3::diag(spectrum[0], spectrum[1], spectrum[2]), r);
}

SymTensor3 sample_orientation_tensor(RotationStream& stream) {
  Vec3 spectrum;
  return sample_orientation_tensor(stream, spectrum);
}

double sample_volume_fraction(RotationStream& stream) {
  return kMinVolumeFraction + (kMaxVolumeFraction - kMinVolumeFraction) * stream.next_uniform();
}

}  // namespace tta
