#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "tta/rotation_sampler.hpp"
#include "tta/tensor.hpp"

using namespace tta;

TEST_CASE("sampled rotations are proper orthogonal") {
  RotationStream s(2024);
  for (int k = 0; k < 10000; ++k) {
    const auto r = sample_rotation(s);
    CHECK(r.orthogonality_error() <= 1e-12);
    CHECK(std::fabs(r.determinant() - 1.0) <= 1e-12);
  }
}

TEST_CASE("replay from the same seed is bitwise identical") {
  RotationStream a(99), b(99);
  for (int k = 0; k < 50; ++k) CHECK(sample_rotation(a) == sample_rotation(b));
  RotationStream c(100);
  RotationStream d(99);
  CHECK_FALSE(sample_rotation(c) == sample_rotation(d));
}

TEST_CASE("substreams are independent of draw order") {
  const RotationStream root(5);
  RotationStream first = root.split(3);
  RotationStream other = root.split(4);
  for (int k = 0; k < 10; ++k) sample_rotation(other);
  RotationStream again = root.split(3);
  CHECK(sample_rotation(first) == sample_rotation(again));
  CHECK(root.counter() == 0);
  CHECK_FALSE(root.split(3).next_u64() == root.split(4).next_u64());
}

TEST_CASE("mean image of e3 is near the origin") {
  RotationStream s(31);
  Vec3 mean{};
  const int n = 10000;
  for (int k = 0; k < n; ++k) {
    const auto p = sample_rotation(s).apply({0, 0, 1});
    for (int i = 0; i < 3; ++i) mean[i] += p[i] / n;
  }
  CHECK(std::hypot(mean[0], mean[1], mean[2]) <= 0.05);
}

TEST_CASE("identity rotation") {
  const auto i = identity_rotation();
  CHECK(i == Rotation3::identity());
  CHECK(i.determinant() == 1.0);
  CHECK(i.transposed() == i);
  const SymTensor3 x(Voigt6{1, -2, 3, 0.25, -0.5, 4});
  CHECK(rotate_sym(x, i) == x);
}

TEST_CASE("rotation_list") {
  RotationStream s(1);
  const auto zero = rotation_list(s, 0);
  REQUIRE(zero.size() == 1);
  CHECK(zero[0] == Rotation3::identity());

  RotationStream t(1);
  const auto three = rotation_list(t, 3);
  REQUIRE(three.size() == 4);
  CHECK(three[0] == Rotation3::identity());

  RotationStream a(77), b(77), c(77);
  const auto l200 = rotation_list(a, 200);
  CHECK(l200 == rotation_list(b, 200));
  const auto l20 = rotation_list(c, 20);
  CHECK(std::equal(l20.begin(), l20.end(), l200.begin()));
}

TEST_CASE("fiber_from_angles") {
  auto near = [](const Vec3& a, const Vec3& b) {
    return std::fabs(a[0] - b[0]) <= 1e-15 && std::fabs(a[1] - b[1]) <= 1e-15 && std::fabs(a[2] - b[2]) <= 1e-15;
  };
  CHECK(near(fiber_from_angles(0, 0).p, {0, 0, 1}));
  CHECK(near(fiber_from_angles(std::numbers::pi / 2, 0).p, {1, 0, 0}));
  CHECK(near(fiber_from_angles(std::numbers::pi / 2, std::numbers::pi / 2).p, {0, 1, 0}));
  const auto f = fiber_from_angles(0.7, 2.1);
  CHECK(std::fabs(std::hypot(f.p[0], f.p[1], f.p[2]) - 1.0) <= 1e-12);
}

TEST_CASE("orientation tensors") {
  RotationStream s(8);
  for (int k = 0; k < 500; ++k) {
    Vec3 spectrum{};
    const auto a = sample_orientation_tensor(s, spectrum);
    CHECK(std::fabs(a.trace() - 1.0) <= 1e-9);
    auto ev = eigenvalues(a);
    CHECK(ev[0] >= -1e-9);
    std::sort(spectrum.begin(), spectrum.end());
    for (int i = 0; i < 3; ++i) CHECK(std::fabs(ev[i] - spectrum[i]) <= 1e-12);
  }
  RotationStream a(4), b(4);
  CHECK(sample_orientation_tensor(a) == sample_orientation_tensor(b));
}

TEST_CASE("volume fractions") {
  RotationStream s(6);
  double mean = 0.0;
  const int n = 10000;
  for (int k = 0; k < n; ++k) {
    const double vf = sample_volume_fraction(s);
    CHECK(vf >= 0.10);
    CHECK(vf <= 0.15);
    mean += vf / n;
  }
  CHECK(std::fabs(mean - 0.125) <= 0.003);
  RotationStream a(2), b(2);
  CHECK(sample_volume_fraction(a) == sample_volume_fraction(b));
}

TEST_CASE("uniform and normal draws") {
  RotationStream s(10);
  double m = 0.0, v = 0.0;
  const int n = 20000;
  for (int k = 0; k < n; ++k) {
    const double u = s.next_uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const double z = s.next_normal();
    m += z / n;
    v += z * z / n;
  }
  CHECK(std::fabs(m) <= 0.05);
  CHECK(std::fabs(v - 1.0) <= 0.05);
}
