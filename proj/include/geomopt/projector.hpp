#pragma once

#include "geomopt/geometry.hpp"
#include "geomopt/image.hpp"

namespace geomopt {

/// N_p x N_d line integrals (gray value * mm) with the scanner they came from.
struct Sinogram {
  Grid values;
  ScanGeometry geometry;

  double detector_spacing() const { return geometry.detector_spacing; }
  /// Throws ShapeError when values do not match geometry.
  void validate() const;
};

/// Ray-driven fan-beam projection. The ray of detector pixel j in view p is
/// the line {h : (row1 - j row2) . h = 0} of P_p, traversed from the source
/// (null space of P_p) in steps of half a pixel with bilinear interpolation.
Sinogram forward_project(const Image& image, const ProjectionMatrixStack& P, const ScanGeometry& geom);

struct CorruptedScan {
  Sinogram sinogram;
  ProjectionMatrixStack perturbed;
  ProjectionMatrixStack nominal;
};

/// Motion-free data from the nominal circle paired with motion-corrupted
/// matrices apply_rigid(nominal, motion).
CorruptedScan simulate_corrupted_scan(const Image& image, const ScanGeometry& geom, const RigidParams& motion);

}  // namespace geomopt
