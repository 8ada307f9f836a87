#pragma once

#include <vector>

#include "geomopt/geometry.hpp"
#include "geomopt/image.hpp"
#include "geomopt/projector.hpp"

namespace geomopt {

/// Cosine-weighted, ramp-filtered projections. Carries the nominal scanner
/// because the backprojection weight and scale depend on it.
struct FilteredSinogram {
  Grid values;
  ScanGeometry geometry;

  double detector_spacing() const { return geometry.detector_spacing; }
};

/// Geometry gradient: one 2x3 block per view, same layout as the stack.
struct GeometryGradient {
  std::vector<ProjectionMatrix> values;

  std::size_t size() const { return values.size(); }
  static GeometryGradient zeros(std::size_t n) { return {std::vector<ProjectionMatrix>(n, ProjectionMatrix::Zero())}; }
};

/// Discrete Ram-Lak kernel h[k] for k = -(n-1) .. n-1, stored at index k + n - 1.
Eigen::VectorXd ram_lak_kernel(int n, double spacing);

/// Cosine weighting, Ram-Lak convolution (zero-padded FFT) and scaling by the
/// detector spacing. Uses the nominal geometry only.
FilteredSinogram weight_and_filter(const Sinogram& sino);

/// Global backprojection scale: pi / N_p times the detector magnification
/// (the filter runs in detector-plane units, reconstruction lives at the
/// isocentre).
double backprojection_scale(const ScanGeometry& geom);

/// I(x) = scale * sum_p (d_si^2 / w_p(x)^2) * lerp(fsino_p, u_p(x)).
/// Out-of-detector samples and pixels behind the source contribute zero.
Image backproject(const FilteredSinogram& fsino, const ProjectionMatrixStack& P, const GridSpec& grid);

/// weight_and_filter followed by backproject.
Image reconstruct(const Sinogram& sino, const ProjectionMatrixStack& P, const GridSpec& grid);

/// Vector-Jacobian product of backproject with respect to the matrix entries:
/// G_p = sum_x cotangent(x) * dI(x)/dP_p.
GeometryGradient backproject_vjp(const FilteredSinogram& fsino, const ProjectionMatrixStack& P,
                                 const Image& cotangent);

}  // namespace geomopt
