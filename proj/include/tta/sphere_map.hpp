#pragma once

// Per-rotation values on the unit sphere, Mollweide projection and
// nearest-seed (Voronoi) rasterization for map figures.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tta/tensor.hpp"

namespace tta::sphere {

inline constexpr double kDefaultRadius = 2.0;

struct SpherePoint {
  Vec3 xyz{};
  double value = 0.0;
};

struct LatLon {
  double lat = 0.0;  ///< phi in [-pi/2, pi/2]
  double lon = 0.0;  ///< lambda in (-pi, pi]
};

struct ProjectedPoint {
  double x = 0.0;
  double y = 0.0;
  double value = 0.0;
};

/// r * [0, 0, 1]^T carrying `value`.
SpherePoint rotation_to_sphere(const Rotation3& r, double value);

/// Two-argument arctangent for longitude; longitude is 0 at the poles.
/// Throws InvalidArgument for the zero vector.
LatLon cart_to_latlon(const Vec3& xyz);

/// Auxiliary angle with 2 theta + sin(2 theta) = pi sin(lat), by Newton
/// iteration from theta = lat; |residual| <= 1e-12.
double solve_theta(double lat);

/// Plane coordinates; |x| <= 2 sqrt(2) R and |y| <= sqrt(2) R.
ProjectedPoint mollweide_project(const LatLon& ll, double radius = kDefaultRadius);

/// Whether plane point (x, y) lies inside the projection ellipse.
bool inside_ellipse(double x, double y, double radius);

class RasterGrid {
 public:
  RasterGrid(std::size_t width, std::size_t height, double radius);

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  double radius() const { return radius_; }

  /// Row 0 is the top (largest y).
  double cell_x(std::size_t col) const;
  double cell_y(std::size_t row) const;
  double cell_width() const;
  double cell_height() const;

  bool empty(std::size_t col, std::size_t row) const { return seed(col, row) < 0; }
  std::int64_t seed(std::size_t col, std::size_t row) const { return seeds_[row * width_ + col]; }
  double value(std::size_t col, std::size_t row) const { return values_[row * width_ + col]; }

  void set(std::size_t col, std::size_t row, std::int64_t seed, double value);

 private:
  std::size_t width_, height_;
  double radius_;
  std::vector<std::int64_t> seeds_;  // -1 outside the ellipse
  std::vector<double> values_;
};

/// Each in-ellipse cell takes the value of the nearest seed (Euclidean in the
/// plane, lowest index on ties); cells outside the ellipse stay empty.
RasterGrid voronoi_rasterize(std::span<const ProjectedPoint> seeds, std::size_t width, std::size_t height,
                             double radius = kDefaultRadius);

enum class Colormap { viridis, gray };

/// Throws InvalidArgument for unknown names.
Colormap parse_colormap(const std::string& name);

/// SVG 1.1 document: run-length-merged cell rectangles, ellipse outline and a
/// colorbar spanning the seed value range.
std::string render_svg(const RasterGrid& grid, std::span<const ProjectedPoint> seeds, Colormap cmap);
/// Header "x,y,mere", one row per seed.
std::string seeds_csv(std::span<const ProjectedPoint> seeds);

void export_map(const RasterGrid& grid, std::span<const ProjectedPoint> seeds, Colormap cmap,
                const std::filesystem::path& svg_path, const std::filesystem::path& csv_path);

/// Rotations and their values through the whole pipeline.
std::vector<ProjectedPoint> project_rotations(std::span<const Rotation3> rotations,
                                              std::span<const double> values, double radius = kDefaultRadius);

}  // namespace tta::sphere
