#pragma once

// Symmetric second-order tensors in Voigt storage and their rotation.
//
// Component order is [11, 22, 33, 12, 13, 23] everywhere. Shear entries hold
// tensor components (eps12, not engineering 2*eps12); rotations always act on
// the reconstructed 3x3 matrix, so no shear-factor bookkeeping exists.

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace tta {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<std::array<double, 3>, 3>;
using Voigt6 = std::array<double, 6>;
/// A scalar time series, one value per pseudo time step.
using Series = std::vector<double>;

inline constexpr std::size_t kVoigtSize = 6;

/// Row/column of each Voigt slot in the 3x3 matrix.
inline constexpr std::array<std::array<int, 2>, kVoigtSize> kVoigtIndex{
    {{0, 0}, {1, 1}, {2, 2}, {0, 1}, {0, 2}, {1, 2}}};

Mat3 matmul(const Mat3& a, const Mat3& b);
Mat3 transpose(const Mat3& a);
double determinant(const Mat3& a);
Vec3 apply(const Mat3& a, const Vec3& v);

class SymTensor3 {
 public:
  constexpr SymTensor3() = default;
  constexpr explicit SymTensor3(const Voigt6& v) : v_(v) {}

  static constexpr SymTensor3 diag(double d11, double d22, double d33) {
    return SymTensor3(Voigt6{d11, d22, d33, 0.0, 0.0, 0.0});
  }
  static constexpr SymTensor3 identity() { return diag(1.0, 1.0, 1.0); }

  /// Reads the upper triangle; the lower triangle is ignored.
  static SymTensor3 from_matrix(const Mat3& m);
  Mat3 to_matrix() const;

  constexpr double operator[](std::size_t k) const { return v_[k]; }
  constexpr double& operator[](std::size_t k) { return v_[k]; }
  constexpr const Voigt6& voigt() const { return v_; }

  constexpr double trace() const { return v_[0] + v_[1] + v_[2]; }
  bool is_finite() const;

  SymTensor3& operator+=(const SymTensor3& o);
  SymTensor3& operator-=(const SymTensor3& o);
  SymTensor3& operator*=(double s);

  friend bool operator==(const SymTensor3&, const SymTensor3&) = default;

 private:
  Voigt6 v_{};
};

SymTensor3 operator+(SymTensor3 a, const SymTensor3& b);
SymTensor3 operator-(SymTensor3 a, const SymTensor3& b);
SymTensor3 operator*(double s, SymTensor3 a);

/// Largest absolute component difference.
double max_abs_diff(const SymTensor3& a, const SymTensor3& b);

/// Proper orthogonal 3x3 matrix. Construction from raw entries is checked.
class Rotation3 {
 public:
  /// Orthogonality and determinant tolerance for checked construction.
  static constexpr double kTolerance = 1e-12;

  Rotation3() : Rotation3(identity()) {}

  static Rotation3 identity();
  /// Throws InvariantViolation unless m*m^T = I and det m = +1 within `tol`.
  static Rotation3 from_matrix(const Mat3& m, double tol = kTolerance);
  /// Right-handed rotation by `angle` radians about the unit `axis`.
  static Rotation3 about_axis(const Vec3& axis, double angle);

  const Mat3& matrix() const { return m_; }
  double operator()(int i, int j) const { return m_[i][j]; }

  Rotation3 transposed() const;
  Vec3 apply(const Vec3& v) const { return tta::apply(m_, v); }

  /// max |(m m^T - I)_ij|
  double orthogonality_error() const;
  double determinant() const { return tta::determinant(m_); }

  friend Rotation3 operator*(const Rotation3& a, const Rotation3& b);
  friend bool operator==(const Rotation3&, const Rotation3&) = default;

 private:
  explicit Rotation3(const Mat3& m) : m_(m) {}
  Mat3 m_{};
};

/// r * X * r^T, upper triangle of the full product.
SymTensor3 rotate_sym(const SymTensor3& x, const Rotation3& r);
/// r^T * X * r
SymTensor3 inverse_rotate_sym(const SymTensor3& x, const Rotation3& r);

/// Equivalent (von Mises) stress; all six components contribute.
double von_mises(const SymTensor3& x);

/// Ordered sequence of tensors over pseudo time, length T >= 1, all finite.
class TensorPath {
 public:
  TensorPath() = default;
  /// Throws InvariantViolation if `steps` is empty or holds non-finite values.
  explicit TensorPath(std::vector<SymTensor3> steps);

  std::size_t size() const { return steps_.size(); }
  bool empty() const { return steps_.empty(); }
  const SymTensor3& operator[](std::size_t t) const { return steps_[t]; }
  std::span<const SymTensor3> steps() const { return steps_; }

  auto begin() const { return steps_.begin(); }
  auto end() const { return steps_.end(); }

  /// One component over time.
  Series component(std::size_t k) const;

  friend bool operator==(const TensorPath&, const TensorPath&) = default;

 private:
  std::vector<SymTensor3> steps_;
};

Series von_mises_path(const TensorPath& p);
TensorPath rotate_path(const TensorPath& p, const Rotation3& r);
TensorPath inverse_rotate_path(const TensorPath& p, const Rotation3& r);

/// Eigenvalues in ascending order.
Vec3 eigenvalues(const SymTensor3& x);

/// Trace 1 within 1e-9 and eigenvalues >= -1e-9.
bool is_orientation_tensor(const SymTensor3& a);

}  // namespace tta
