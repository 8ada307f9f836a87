#pragma once

#include <cstdint>
#include <vector>

#include "geomopt/image.hpp"

namespace geomopt {

/// Filled ellipse with additive gray value. Centre and semi-axes in mm.
struct EllipseSpec {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  Eigen::Vector2d semi_axes = Eigen::Vector2d::Ones();
  double rotation = 0.0;
  double additive_value = 1.0;

  bool contains(double x, double y) const;
};

/// Pixel value = sum of additive_value over ellipses containing the pixel
/// centre. No anti-aliasing.
Image rasterize_ellipses(const std::vector<EllipseSpec>& specs, int n, double spacing);

/// The ten-ellipse (modified, values in [0, 1]) Shepp-Logan table with the
/// unit square mapped to `half_extent` mm.
std::vector<EllipseSpec> shepp_logan_ellipses(double half_extent);

/// Shepp-Logan phantom on an n x n grid covering n * spacing mm. n >= 16.
Image make_shepp_logan(int n, double spacing);

/// Deterministic phantom family standing in for distinct anatomies.
/// Variant 0 is the plain Shepp-Logan phantom; other variants rotate,
/// mirror and jitter the inner ellipses.
std::vector<EllipseSpec> phantom_variant_ellipses(int variant, double half_extent);
Image make_phantom_variant(int variant, int n, double spacing);

}  // namespace geomopt
