#include "geomopt/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace geomopt {

bool EllipseSpec::contains(double x, double y) const {
  const double dx = x - center.x();
  const double dy = y - center.y();
  const double c = std::cos(rotation);
  const double s = std::sin(rotation);
  const double xr = dx * c + dy * s;
  const double yr = -dx * s + dy * c;
  const double ex = xr / semi_axes.x();
  const double ey = yr / semi_axes.y();
  return ex * ex + ey * ey <= 1.0;
}

Image rasterize_ellipses(const std::vector<EllipseSpec>& specs, int n, double spacing) {
  GridSpec{n, spacing}.validate();
  for (const auto& e : specs)
    if (!(e.semi_axes.x() > 0.0) || !(e.semi_axes.y() > 0.0))
      throw ConfigError("ellipse semi-axes must be strictly positive");

  Image image = Image::zeros({n, spacing});
  for (Eigen::Index i = 0; i < image.rows(); ++i) {
    const double y = image.y_of(i);
    for (Eigen::Index j = 0; j < image.cols(); ++j) {
      const double x = image.x_of(j);
      double value = 0.0;
      for (const auto& e : specs)
        if (e.contains(x, y)) value += e.additive_value;
      image.values(i, j) = value;
    }
  }
  return image;
}

std::vector<EllipseSpec> shepp_logan_ellipses(double half_extent) {
  // value, a, b, x0, y0, phi [deg]; unit-square coordinates
  static constexpr double table[10][6] = {
      {1.0, 0.69, 0.92, 0.0, 0.0, 0.0},
      {-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0},
      {-0.2, 0.11, 0.31, 0.22, 0.0, -18.0},
      {-0.2, 0.16, 0.41, -0.22, 0.0, 18.0},
      {0.1, 0.21, 0.25, 0.0, 0.35, 0.0},
      {0.1, 0.046, 0.046, 0.0, 0.1, 0.0},
      {0.1, 0.046, 0.046, 0.0, -0.1, 0.0},
      {0.1, 0.046, 0.023, -0.08, -0.605, 0.0},
      {0.1, 0.023, 0.023, 0.0, -0.606, 0.0},
      {0.1, 0.023, 0.046, 0.06, -0.605, 0.0},
  };
  std::vector<EllipseSpec> out;
  out.reserve(10);
  for (const auto& row : table) {
    EllipseSpec e;
    e.additive_value = row[0];
    e.semi_axes = half_extent * Eigen::Vector2d(row[1], row[2]);
    e.center = half_extent * Eigen::Vector2d(row[3], row[4]);
    e.rotation = row[5] * std::numbers::pi / 180.0;
    out.push_back(e);
  }
  return out;
}

Image make_shepp_logan(int n, double spacing) {
  if (n < 16) throw ConfigError("Shepp-Logan phantom needs n >= 16");
  return rasterize_ellipses(shepp_logan_ellipses(0.5 * n * spacing), n, spacing);
}

std::vector<EllipseSpec> phantom_variant_ellipses(int variant, double half_extent) {
  auto ellipses = shepp_logan_ellipses(half_extent);
  if (variant == 0) return ellipses;

  std::mt19937_64 rng(0x5eed0000ULL + static_cast<std::uint64_t>(variant));
  std::uniform_real_distribution<double> shift(-0.02 * half_extent, 0.02 * half_extent);
  std::uniform_real_distribution<double> gain(0.8, 1.2);
  const double angle = (variant * 37 % 360) * std::numbers::pi / 180.0;
  const bool mirror = variant % 2 == 1;
  const double c = std::cos(angle);
  const double s = std::sin(angle);

  for (std::size_t k = 0; k < ellipses.size(); ++k) {
    auto& e = ellipses[k];
    if (k >= 2) {
      e.center += Eigen::Vector2d(shift(rng), shift(rng));
      const double g = gain(rng);
      // keep the negative (darker) inserts from pushing values below zero
      e.additive_value *= e.additive_value < 0.0 ? std::min(g, 1.0) : g;
    }
    if (mirror) {
      e.center.x() = -e.center.x();
      e.rotation = -e.rotation;
    }
    e.center = Eigen::Vector2d(c * e.center.x() - s * e.center.y(), s * e.center.x() + c * e.center.y());
    e.rotation += angle;
  }
  return ellipses;
}

Image make_phantom_variant(int variant, int n, double spacing) {
  if (n < 16) throw ConfigError("phantom needs n >= 16");
  if (variant < 0) throw ConfigError("phantom variant must be >= 0");
  return rasterize_ellipses(phantom_variant_ellipses(variant, 0.5 * n * spacing), n, spacing);
}

}  // namespace geomopt
