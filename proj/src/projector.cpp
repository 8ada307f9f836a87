#include "geomopt/projector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "geomopt/parallel.hpp"

namespace geomopt {

void Sinogram::validate() const {
  if (values.rows() != geometry.num_projections || values.cols() != geometry.num_detector_pixels)
    throw ShapeError("sinogram is " + std::to_string(values.rows()) + "x" + std::to_string(values.cols()) +
                     ", geometry expects " + std::to_string(geometry.num_projections) + "x" +
                     std::to_string(geometry.num_detector_pixels));
  if (!values.allFinite()) throw ShapeError("sinogram contains non-finite values");
}

namespace {

// Bilinear sample in continuous pixel-index coordinates, zero outside.
double sample(const Grid& g, double fx, double fy) {
  const double x0f = std::floor(fx);
  const double y0f = std::floor(fy);
  const auto j0 = static_cast<Eigen::Index>(x0f);
  const auto i0 = static_cast<Eigen::Index>(y0f);
  const double ax = fx - x0f;
  const double ay = fy - y0f;
  const auto at = [&g](Eigen::Index i, Eigen::Index j) {
    return (i >= 0 && j >= 0 && i < g.rows() && j < g.cols()) ? g(i, j) : 0.0;
  };
  const double top = (1.0 - ax) * at(i0, j0) + ax * at(i0, j0 + 1);
  const double bottom = (1.0 - ax) * at(i0 + 1, j0) + ax * at(i0 + 1, j0 + 1);
  return (1.0 - ay) * top + ay * bottom;
}

// Parameter interval where source + t * dir lies inside [lo, hi] on one axis.
void clip_slab(double origin, double dir, double lo, double hi, double& t0, double& t1) {
  if (dir == 0.0) {
    if (origin < lo || origin > hi) {
      t0 = 1.0;
      t1 = 0.0;
    }
    return;
  }
  double a = (lo - origin) / dir;
  double b = (hi - origin) / dir;
  if (a > b) std::swap(a, b);
  t0 = std::max(t0, a);
  t1 = std::min(t1, b);
}

}  // namespace

Sinogram forward_project(const Image& image, const ProjectionMatrixStack& P, const ScanGeometry& geom) {
  geom.validate();
  if (P.size() != static_cast<std::size_t>(geom.num_projections))
    throw ShapeError("projection stack has " + std::to_string(P.size()) + " views, geometry has " +
                     std::to_string(geom.num_projections));
  if (image.rows() < 1 || image.cols() < 1) throw ShapeError("empty image");

  const int n_det = geom.num_detector_pixels;
  Sinogram sino{Grid::Zero(geom.num_projections, n_det), geom};

  const double spacing = image.pixel_spacing;
  const double step = 0.5 * spacing;
  const double x_first = image.x_of(0);
  const double y_first = image.y_of(0);
  // Bilinear support extends one pixel beyond the outermost centres.
  const double x_lo = x_first - spacing;
  const double x_hi = image.x_of(image.cols() - 1) + spacing;
  const double y_lo = y_first - spacing;
  const double y_hi = image.y_of(image.rows() - 1) + spacing;

  parallel_for(P.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p) {
      const ProjectionMatrix& M = P[p];
      const Vector2 source = source_position(M);
      for (int j = 0; j < n_det; ++j) {
        const Eigen::Vector3d line = (M.row(0) - j * M.row(1)).transpose();
        Vector2 dir(-line.y(), line.x());
        const double norm = dir.norm();
        if (norm == 0.0) continue;
        dir /= norm;
        if (M(1, 0) * dir.x() + M(1, 1) * dir.y() < 0.0) dir = -dir;

        double t0 = 0.0;
        double t1 = std::numeric_limits<double>::infinity();
        clip_slab(source.x(), dir.x(), x_lo, x_hi, t0, t1);
        clip_slab(source.y(), dir.y(), y_lo, y_hi, t0, t1);
        if (!(t1 > t0)) continue;

        const auto k_begin = static_cast<long>(std::max(1.0, std::ceil(t0 / step)));
        const auto k_end = static_cast<long>(std::floor(t1 / step));
        double sum = 0.0;
        for (long k = k_begin; k <= k_end; ++k) {
          const double t = static_cast<double>(k) * step;
          const double x = source.x() + t * dir.x();
          const double y = source.y() + t * dir.y();
          sum += sample(image.values, (x - x_first) / spacing, (y - y_first) / spacing);
        }
        sino.values(static_cast<Eigen::Index>(p), j) = sum * step;
      }
    }
  });
  return sino;
}

CorruptedScan simulate_corrupted_scan(const Image& image, const ScanGeometry& geom, const RigidParams& motion) {
  ProjectionMatrixStack nominal = make_circular_trajectory(geom);
  ProjectionMatrixStack perturbed = apply_rigid(nominal, motion);
  Sinogram sino = forward_project(image, nominal, geom);
  return {std::move(sino), std::move(perturbed), std::move(nominal)};
}

}  // namespace geomopt
