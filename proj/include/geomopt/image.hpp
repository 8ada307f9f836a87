#pragma once

#include <Eigen/Core>

#include "geomopt/error.hpp"

namespace geomopt {

/// Row-major dense grid; rows run along y (images) or projections (sinograms).
using Grid = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Square reconstruction grid: n x n pixels of `spacing` mm centred on the
/// world origin.
struct GridSpec {
  int size = 256;
  double spacing = 2.0;

  void validate() const {
    if (size < 1) throw ConfigError("grid size must be >= 1");
    if (!(spacing > 0.0)) throw ConfigError("pixel spacing must be positive");
  }
  bool operator==(const GridSpec&) const = default;
};

/// Gray-value image. Pixel (i, j) has its centre at
/// origin + ((j - (cols-1)/2) * spacing, (i - (rows-1)/2) * spacing).
struct Image {
  Grid values;
  double pixel_spacing = 1.0;
  Eigen::Vector2d origin = Eigen::Vector2d::Zero();

  Image() = default;
  Image(Grid v, double spacing, Eigen::Vector2d o = Eigen::Vector2d::Zero())
      : values(std::move(v)), pixel_spacing(spacing), origin(std::move(o)) {}

  static Image zeros(const GridSpec& spec) { return Image(Grid::Zero(spec.size, spec.size), spec.spacing); }

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
  double x_of(Eigen::Index j) const { return origin.x() + (static_cast<double>(j) - 0.5 * (cols() - 1)) * pixel_spacing; }
  double y_of(Eigen::Index i) const { return origin.y() + (static_cast<double>(i) - 0.5 * (rows() - 1)) * pixel_spacing; }
};

}  // namespace geomopt
