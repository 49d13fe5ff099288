#include "tta/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "tta/errors.hpp"

namespace tta {

Mat3 matmul(const Mat3& a, const Mat3& b) {
  Mat3 c{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
    }
  }
  return c;
}

Mat3 transpose(const Mat3& a) {
  Mat3 t{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) t[i][j] = a[j][i];
  }
  return t;
}

double determinant(const Mat3& a) {
  return a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
         a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
         a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
}

Vec3 apply(const Mat3& a, const Vec3& v) {
  return {a[0][0] * v[0] + a[0][1] * v[1] + a[0][2] * v[2],
          a[1][0] * v[0] + a[1][1] * v[1] + a[1][2] * v[2],
          a[2][0] * v[0] + a[2][1] * v[1] + a[2][2] * v[2]};
}

// ---------------------------------------------------------------------------
// SymTensor3

SymTensor3 SymTensor3::from_matrix(const Mat3& m) {
  Voigt6 v{};
  for (std::size_t k = 0; k < kVoigtSize; ++k) v[k] = m[kVoigtIndex[k][0]][kVoigtIndex[k][1]];
  return SymTensor3(v);
}

Mat3 SymTensor3::to_matrix() const {
  return {{{v_[0], v_[3], v_[4]}, {v_[3], v_[1], v_[5]}, {v_[4], v_[5], v_[2]}}};
}

bool SymTensor3::is_finite() const {
  return std::all_of(v_.begin(), v_.end(), [](double x) { return std::isfinite(x); });
}

SymTensor3& SymTensor3::operator+=(const SymTensor3& o) {
  for (std::size_t k = 0; k < kVoigtSize; ++k) v_[k] += o.v_[k];
  return *this;
}

SymTensor3& SymTensor3::operator-=(const SymTensor3& o) {
  for (std::size_t k = 0; k < kVoigtSize; ++k) v_[k] -= o.v_[k];
  return *this;
}

SymTensor3& SymTensor3::operator*=(double s) {
  for (auto& x : v_) x *= s;
  return *this;
}

SymTensor3 operator+(SymTensor3 a, const SymTensor3& b) { return a += b; }
SymTensor3 operator-(SymTensor3 a, const SymTensor3& b) { return a -= b; }
SymTensor3 operator*(double s, SymTensor3 a) { return a *= s; }

double max_abs_diff(const SymTensor3& a, const SymTensor3& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < kVoigtSize; ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

// ---------------------------------------------------------------------------
// Rotation3

Rotation3 Rotation3::identity() {
  return Rotation3(Mat3{{{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}}});
}

Rotation3 Rotation3::from_matrix(const Mat3& m, double tol) {
  for (const auto& row : m) {
    for (double x : row) {
      if (!std::isfinite(x)) throw InvariantViolation("rotation has non-finite entries");
    }
  }
  Rotation3 r(m);
  const double orth = r.orthogonality_error();
  if (orth > tol) {
    throw InvariantViolation("rotation is not orthogonal: max |R R^T - I| = " + std::to_string(orth));
  }
  const double det = r.determinant();
  if (std::abs(det - 1.0) > tol) {
    throw InvariantViolation("rotation determinant is " + std::to_string(det) + ", expected +1");
  }
  return r;
}

Rotation3 Rotation3::about_axis(const Vec3& axis, double angle) {
  const double n = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
  if (!(n > 0.0)) throw InvalidArgument("rotation axis must be non-zero");
  const double x = axis[0] / n, y = axis[1] / n, z = axis[2] / n;
  const double c = std::cos(angle), s = std::sin(angle), k = 1.0 - c;
  // Rodrigues
  return Rotation3(Mat3{{{c + x * x * k, x * y * k - z * s, x * z * k + y * s},
                         {y * x * k + z * s, c + y * y * k, y * z * k - x * s},
                         {z * x * k - y * s, z * y * k + x * s, c + z * z * k}}});
}

Rotation3 Rotation3::transposed() const { return Rotation3(tta::transpose(m_)); }

double Rotation3::orthogonality_error() const {
  const Mat3 p = matmul(m_, tta::transpose(m_));
  double err = 0.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) err = std::max(err, std::abs(p[i][j] - (i == j ? 1.0 : 0.0)));
  }
  return err;
}

Rotation3 operator*(const Rotation3& a, const Rotation3& b) { return Rotation3(matmul(a.m_, b.m_)); }

// ---------------------------------------------------------------------------

namespace {

// Upper triangle of A * X * A^T for a general A. Symmetry holds structurally:
// only six entries of the product are ever read.
SymTensor3 conjugate(const Mat3& a, const SymTensor3& x) {
  const Mat3 ax = matmul(a, x.to_matrix());
  const Mat3 full = matmul(ax, transpose(a));
  return SymTensor3::from_matrix(full);
}

}  // namespace

SymTensor3 rotate_sym(const SymTensor3& x, const Rotation3& r) { return conjugate(r.matrix(), x); }

SymTensor3 inverse_rotate_sym(const SymTensor3& x, const Rotation3& r) {
  return conjugate(transpose(r.matrix()), x);
}

double von_mises(const SymTensor3& x) {
  const double d1 = x[0] - x[1];
  const double d2 = x[1] - x[2];
  const double d3 = x[2] - x[0];
  const double shear = x[3] * x[3] + x[4] * x[4] + x[5] * x[5];
  return std::sqrt(0.5 * (d1 * d1 + d2 * d2 + d3 * d3) + 3.0 * shear);
}

// ---------------------------------------------------------------------------
// TensorPath

TensorPath::TensorPath(std::vector<SymTensor3> steps) : steps_(std::move(steps)) {
  if (steps_.empty()) throw InvariantViolation("tensor path must have at least one step");
  for (std::size_t t = 0; t < steps_.size(); ++t) {
    if (!steps_[t].is_finite()) {
      throw InvariantViolation("tensor path has non-finite values at step " + std::to_string(t));
    }
  }
}

Series TensorPath::component(std::size_t k) const {
  Series out(steps_.size());
  for (std::size_t t = 0; t < steps_.size(); ++t) out[t] = steps_[t][k];
  return out;
}

Series von_mises_path(const TensorPath& p) {
  Series out(p.size());
  for (std::size_t t = 0; t < p.size(); ++t) out[t] = von_mises(p[t]);
  return out;
}

TensorPath rotate_path(const TensorPath& p, const Rotation3& r) {
  std::vector<SymTensor3> out;
  out.reserve(p.size());
  for (const auto& x : p) out.push_back(rotate_sym(x, r));
  return TensorPath(std::move(out));
}

TensorPath inverse_rotate_path(const TensorPath& p, const Rotation3& r) {
  std::vector<SymTensor3> out;
  out.reserve(p.size());
  for (const auto& x : p) out.push_back(inverse_rotate_sym(x, r));
  return TensorPath(std::move(out));
}

Vec3 eigenvalues(const SymTensor3& x) {
  Eigen::Matrix3d m;
  const Mat3 a = x.to_matrix();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) m(i, j) = a[i][j];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(m, Eigen::EigenvaluesOnly);
  const auto& ev = solver.eigenvalues();
  return {ev(0), ev(1), ev(2)};
}

bool is_orientation_tensor(const SymTensor3& a) {
  if (!a.is_finite()) return false;
  if (std::abs(a.trace() - 1.0) > 1e-9) return false;
  return eigenvalues(a)[0] >= -1e-9;
}

}  // namespace tta
