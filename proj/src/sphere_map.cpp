#include "tta/sphere_map.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include "tta/errors.hpp"
#include "tta/format.hpp"
#include "tta/numeric.hpp"

namespace tta::sphere {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kHalfPi = std::numbers::pi / 2.0;
const double kSqrt2 = std::sqrt(2.0);

}  // namespace

SpherePoint rotation_to_sphere(const Rotation3& r, double value) {
  return SpherePoint{r.apply(Vec3{0.0, 0.0, 1.0}), value};
}

LatLon cart_to_latlon(const Vec3& xyz) {
  const double norm = std::sqrt(xyz[0] * xyz[0] + xyz[1] * xyz[1] + xyz[2] * xyz[2]);
  if (!(norm > 0.0)) throw InvalidArgument("latitude of the zero vector is undefined");
  LatLon ll;
  ll.lat = std::asin(std::clamp(xyz[2] / norm, -1.0, 1.0));
  ll.lon = (xyz[0] == 0.0 && xyz[1] == 0.0) ? 0.0 : std::atan2(xyz[1], xyz[0]);
  return ll;
}

double solve_theta(double lat) {
  if (lat >= kHalfPi) return kHalfPi;
  if (lat <= -kHalfPi) return -kHalfPi;
  const double rhs = kPi * std::sin(lat);
  double theta = lat;
  double f = 2.0 * theta + std::sin(2.0 * theta) - rhs;
  // Convergence is only linear near the poles, so aim well below the 1e-12 contract.
  for (int it = 0; it < 50 && std::abs(f) > 1e-14; ++it) {
    const double df = 2.0 + 2.0 * std::cos(2.0 * theta);
    if (df == 0.0) break;
    theta = std::clamp(theta - f / df, -kHalfPi, kHalfPi);
    f = 2.0 * theta + std::sin(2.0 * theta) - rhs;
  }
  if (std::abs(f) <= 1e-12) return theta;
  throw NonConvergence("Mollweide auxiliary angle did not converge for latitude " + format_double(lat));
}

ProjectedPoint mollweide_project(const LatLon& ll, double radius) {
  const double theta = solve_theta(ll.lat);
  ProjectedPoint p;
  p.x = radius * (2.0 * kSqrt2 / kPi) * ll.lon * std::cos(theta);
  p.y = radius * kSqrt2 * std::sin(theta);
  return p;
}

bool inside_ellipse(double x, double y, double radius) {
  const double u = x / (2.0 * kSqrt2 * radius);
  const double v = y / (kSqrt2 * radius);
  return u * u + v * v <= 1.0;
}

// ---------------------------------------------------------------------------

RasterGrid::RasterGrid(std::size_t width, std::size_t height, double radius)
    : width_(width), height_(height), radius_(radius) {
  if (width == 0 || height == 0) throw InvalidArgument("raster grid dimensions must be >= 1");
  if (!(radius > 0.0)) throw InvalidArgument("projection radius must be positive");
  seeds_.assign(width * height, -1);
  values_.assign(width * height, std::numeric_limits<double>::quiet_NaN());
}

double RasterGrid::cell_width() const { return 4.0 * kSqrt2 * radius_ / static_cast<double>(width_); }
double RasterGrid::cell_height() const { return 2.0 * kSqrt2 * radius_ / static_cast<double>(height_); }

double RasterGrid::cell_x(std::size_t col) const {
  return -2.0 * kSqrt2 * radius_ + (static_cast<double>(col) + 0.5) * cell_width();
}

double RasterGrid::cell_y(std::size_t row) const {
  return kSqrt2 * radius_ - (static_cast<double>(row) + 0.5) * cell_height();
}

void RasterGrid::set(std::size_t col, std::size_t row, std::int64_t seed, double value) {
  seeds_[row * width_ + col] = seed;
  values_[row * width_ + col] = value;
}

namespace {

// Uniform bucket grid over the projection's bounding box for nearest-seed
// queries.
class SeedIndex {
 public:
  SeedIndex(std::span<const ProjectedPoint> seeds, double radius) : seeds_(seeds) {
    x0_ = -2.0 * kSqrt2 * radius;
    y0_ = -kSqrt2 * radius;
    const double n = static_cast<double>(seeds.size());
    nx_ = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::sqrt(2.0 * n))));
    ny_ = std::max<std::size_t>(1, (nx_ + 1) / 2);
    bw_ = 4.0 * kSqrt2 * radius / static_cast<double>(nx_);
    bh_ = 2.0 * kSqrt2 * radius / static_cast<double>(ny_);
    buckets_.resize(nx_ * ny_);
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      buckets_[bucket_y(seeds[i].y) * nx_ + bucket_x(seeds[i].x)].push_back(i);
    }
  }

  // Nearest seed; ties go to the lowest index.
  std::size_t nearest(double x, double y) const {
    const auto cx = static_cast<std::ptrdiff_t>(bucket_x(x));
    const auto cy = static_cast<std::ptrdiff_t>(bucket_y(y));
    const auto max_ring = static_cast<std::ptrdiff_t>(std::max(nx_, ny_));
    double best_d = std::numeric_limits<double>::infinity();
    std::size_t best = 0;
    for (std::ptrdiff_t ring = 0; ring <= max_ring; ++ring) {
      for (std::ptrdiff_t by = cy - ring; by <= cy + ring; ++by) {
        if (by < 0 || by >= static_cast<std::ptrdiff_t>(ny_)) continue;
        const bool edge_row = (by == cy - ring || by == cy + ring);
        const std::ptrdiff_t step = edge_row ? 1 : 2 * ring;
        for (std::ptrdiff_t bx = cx - ring; bx <= cx + ring; bx += std::max<std::ptrdiff_t>(step, 1)) {
          if (bx < 0 || bx >= static_cast<std::ptrdiff_t>(nx_)) continue;
          for (std::size_t i : buckets_[static_cast<std::size_t>(by) * nx_ + static_cast<std::size_t>(bx)]) {
            const double dx = seeds_[i].x - x;
            const double dy = seeds_[i].y - y;
            const double d = dx * dx + dy * dy;
            if (d < best_d || (d == best_d && i < best)) {
              best_d = d;
              best = i;
            }
          }
        }
      }
      // Every seed in ring+1 or beyond is at least `ring` whole buckets away.
      const double bound = static_cast<double>(ring) * std::min(bw_, bh_);
      if (best_d < bound * bound) break;
    }
    return best;
  }

 private:
  std::size_t bucket_x(double x) const { return clamp_index((x - x0_) / bw_, nx_); }
  std::size_t bucket_y(double y) const { return clamp_index((y - y0_) / bh_, ny_); }

  static std::size_t clamp_index(double f, std::size_t n) {
    if (!(f > 0.0)) return 0;
    return std::min(n - 1, static_cast<std::size_t>(f));
  }

  std::span<const ProjectedPoint> seeds_;
  double x0_, y0_, bw_, bh_;
  std::size_t nx_, ny_;
  std::vector<std::vector<std::size_t>> buckets_;
};

}  // namespace

RasterGrid voronoi_rasterize(std::span<const ProjectedPoint> seeds, std::size_t width, std::size_t height,
                             double radius) {
  if (seeds.empty()) throw InvalidArgument("rasterization needs at least one seed");
  RasterGrid grid(width, height, radius);
  const SeedIndex index(seeds, radius);
  parallel_for(height, [&](std::size_t row) {
    const double y = grid.cell_y(row);
    for (std::size_t col = 0; col < width; ++col) {
      const double x = grid.cell_x(col);
      if (!inside_ellipse(x, y, radius)) continue;
      const std::size_t s = index.nearest(x, y);
      grid.set(col, row, static_cast<std::int64_t>(s), seeds[s].value);
    }
  });
  return grid;
}

// ---------------------------------------------------------------------------
// Export

Colormap parse_colormap(const std::string& name) {
  if (name == "viridis") return Colormap::viridis;
  if (name == "gray" || name == "grey") return Colormap::gray;
  throw InvalidArgument("unknown colormap '" + name + "' (expected viridis or gray)");
}

namespace {

struct Rgb {
  double r, g, b;
};

constexpr std::array<Rgb, 10> kViridis{{{0x44, 0x01, 0x54},
                                        {0x48, 0x28, 0x78},
                                        {0x3e, 0x49, 0x89},
                                        {0x31, 0x68, 0x8e},
                                        {0x26, 0x82, 0x8e},
                                        {0x1f, 0x9e, 0x89},
                                        {0x35, 0xb7, 0x79},
                                        {0x6e, 0xce, 0x58},
                                        {0xb5, 0xde, 0x2b},
                                        {0xfd, 0xe7, 0x25}}};

std::string hex_color(Rgb c) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s = "#";
  for (double ch : {c.r, c.g, c.b}) {
    const int v = std::clamp(static_cast<int>(std::lround(ch)), 0, 255);
    s += kDigits[v / 16];
    s += kDigits[v % 16];
  }
  return s;
}

std::string color_for(double u, Colormap cmap) {
  u = std::clamp(u, 0.0, 1.0);
  if (cmap == Colormap::gray) {
    const double v = 255.0 * u;
    return hex_color({v, v, v});
  }
  const double pos = u * static_cast<double>(kViridis.size() - 1);
  const auto k = std::min(static_cast<std::size_t>(pos), kViridis.size() - 2);
  const double f = pos - static_cast<double>(k);
  const Rgb a = kViridis[k], b = kViridis[k + 1];
  return hex_color({a.r + f * (b.r - a.r), a.g + f * (b.g - a.g), a.b + f * (b.b - a.b)});
}

std::string fmt(double x) { return format_double(x); }

}  // namespace

std::string render_svg(const RasterGrid& grid, std::span<const ProjectedPoint> seeds, Colormap cmap) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& s : seeds) {
    lo = std::min(lo, s.value);
    hi = std::max(hi, s.value);
  }
  const double range = hi - lo;
  auto unit = [&](double v) { return range > 0.0 ? (v - lo) / range : 0.5; };

  const std::size_t w = grid.width(), h = grid.height();
  const std::size_t bar_x = w + 20, bar_w = 20, total_w = w + 110;
  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + std::to_string(total_w) +
         "\" height=\"" + std::to_string(h) + "\" viewBox=\"0 0 " + std::to_string(total_w) + " " +
         std::to_string(h) + "\" shape-rendering=\"crispEdges\">\n";
  // Cells outside the ellipse are left undrawn over this background.
  out += "<rect id=\"empty\" x=\"0\" y=\"0\" width=\"" + std::to_string(w) + "\" height=\"" + std::to_string(h) +
         "\" fill=\"#ffffff\"/>\n";
  out += "<g id=\"cells\">\n";
  for (std::size_t row = 0; row < h; ++row) {
    std::size_t col = 0;
    while (col < w) {
      if (grid.empty(col, row)) {
        ++col;
        continue;
      }
      const std::string color = color_for(unit(grid.value(col, row)), cmap);
      std::size_t end = col + 1;
      while (end < w && !grid.empty(end, row) && color_for(unit(grid.value(end, row)), cmap) == color) ++end;
      out += "<rect x=\"" + std::to_string(col) + "\" y=\"" + std::to_string(row) + "\" width=\"" +
             std::to_string(end - col) + "\" height=\"1\" fill=\"" + color + "\"/>\n";
      col = end;
    }
  }
  out += "</g>\n";
  out += "<ellipse id=\"outline\" cx=\"" + fmt(w / 2.0) + "\" cy=\"" + fmt(h / 2.0) + "\" rx=\"" +
         fmt(w / 2.0) + "\" ry=\"" + fmt(h / 2.0) + "\" fill=\"none\" stroke=\"#000000\" stroke-width=\"1\"/>\n";

  out += "<g id=\"colorbar\">\n";
  constexpr std::size_t kBarSteps = 64;
  const double step_h = static_cast<double>(h) / kBarSteps;
  for (std::size_t k = 0; k < kBarSteps; ++k) {
    const double u = 1.0 - (static_cast<double>(k) + 0.5) / kBarSteps;
    out += "<rect x=\"" + std::to_string(bar_x) + "\" y=\"" + fmt(static_cast<double>(k) * step_h) +
           "\" width=\"" + std::to_string(bar_w) + "\" height=\"" + fmt(step_h) + "\" fill=\"" +
           color_for(u, cmap) + "\"/>\n";
  }
  out += "<text x=\"" + std::to_string(bar_x + bar_w + 4) + "\" y=\"10\" font-size=\"10\">" + fmt(hi) +
         "</text>\n";
  out += "<text x=\"" + std::to_string(bar_x + bar_w + 4) + "\" y=\"" + std::to_string(h) +
         "\" font-size=\"10\">" + fmt(lo) + "</text>\n";
  out += "</g>\n</svg>\n";
  return out;
}

std::string seeds_csv(std::span<const ProjectedPoint> seeds) {
  std::string out = "x,y,mere\n";
  for (const auto& s : seeds) out += fmt(s.x) + "," + fmt(s.y) + "," + fmt(s.value) + "\n";
  return out;
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  f << content;
  if (!f) throw Error("failed writing " + path.string());
}

}  // namespace

void export_map(const RasterGrid& grid, std::span<const ProjectedPoint> seeds, Colormap cmap,
                const std::filesystem::path& svg_path, const std::filesystem::path& csv_path) {
  write_file(svg_path, render_svg(grid, seeds, cmap));
  write_file(csv_path, seeds_csv(seeds));
}

std::vector<ProjectedPoint> project_rotations(std::span<const Rotation3> rotations,
                                              std::span<const double> values, double radius) {
  if (rotations.size() != values.size()) throw InvalidArgument("one value per rotation is required");
  std::vector<ProjectedPoint> out;
  out.reserve(rotations.size());
  for (std::size_t i = 0; i < rotations.size(); ++i) {
    const SpherePoint sp = rotation_to_sphere(rotations[i], values[i]);
    ProjectedPoint p = mollweide_project(cart_to_latlon(sp.xyz), radius);
    p.value = values[i];
    out.push_back(p);
  }
  return out;
}

}  // namespace tta::sphere
