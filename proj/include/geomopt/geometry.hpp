#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Core>

#include "geomopt/error.hpp"

namespace geomopt {

/// 2x3 fan-beam projection matrix: maps homogeneous world (x, y, 1) to
/// homogeneous detector (s, w) with u = s / w in detector pixels.
template <typename Scalar>
using ProjectionMatrixT = Eigen::Matrix<Scalar, 2, 3>;
template <typename Scalar>
using RigidTransformT = Eigen::Matrix<Scalar, 3, 3>;

using ProjectionMatrix = ProjectionMatrixT<double>;
using Vector2 = Eigen::Vector2d;

/// Circular fan-beam scanner. Distances in mm, angles in radians.
struct ScanGeometry {
  double source_isocenter_distance = 1000.0;
  double source_detector_distance = 2000.0;
  int num_projections = 360;
  int num_detector_pixels = 1024;
  double detector_spacing = 2.0;
  double angular_range = 2.0 * std::numbers::pi;
  double start_angle = 0.0;

  /// Throws ConfigError when an invariant is violated.
  void validate() const;

  double principal_point() const { return 0.5 * (num_detector_pixels - 1); }
  double angle(int p) const { return start_angle + p * angular_range / num_projections; }
  double magnification() const { return source_detector_distance / source_isocenter_distance; }

  bool operator==(const ScanGeometry&) const = default;
};

/// N_p projection matrices, one per view.
class ProjectionMatrixStack {
 public:
  ProjectionMatrixStack() = default;
  explicit ProjectionMatrixStack(std::size_t n) : matrices_(n, ProjectionMatrix::Zero()) {}
  explicit ProjectionMatrixStack(std::vector<ProjectionMatrix> matrices) : matrices_(std::move(matrices)) {}

  std::size_t size() const { return matrices_.size(); }
  ProjectionMatrix& operator[](std::size_t p) { return matrices_[p]; }
  const ProjectionMatrix& operator[](std::size_t p) const { return matrices_[p]; }
  auto begin() const { return matrices_.begin(); }
  auto end() const { return matrices_.end(); }
  const std::vector<ProjectionMatrix>& matrices() const { return matrices_; }

  bool operator==(const ProjectionMatrixStack& other) const { return matrices_ == other.matrices_; }

 private:
  std::vector<ProjectionMatrix> matrices_;
};

/// Per-projection rigid motion: rotation about the world origin (rad) then
/// translation (mm).
struct RigidParams {
  Eigen::VectorXd rotation;
  Eigen::VectorXd translation_x;
  Eigen::VectorXd translation_y;

  static RigidParams zeros(int num_projections);
  Eigen::Index size() const { return rotation.size(); }
  /// Throws ShapeError on length mismatch and ConfigError on non-finite values.
  void validate() const;
};

/// Homogeneous rigid transform [[c, -s, tx], [s, c, ty], [0, 0, 1]].
template <typename Scalar>
RigidTransformT<Scalar> rigid_transform(Scalar r, Scalar tx, Scalar ty) {
  using std::cos;
  using std::sin;
  RigidTransformT<Scalar> T;
  const Scalar c = cos(r);
  const Scalar s = sin(r);
  T << c, -s, tx,
       s, c, ty,
       Scalar(0), Scalar(0), Scalar(1);
  return T;
}

/// Homogeneous depth w = row2 . (x, y, 1).
template <typename Scalar>
Scalar depth(const ProjectionMatrixT<Scalar>& P, const Eigen::Matrix<Scalar, 2, 1>& x) {
  return P(1, 0) * x.x() + P(1, 1) * x.y() + P(1, 2);
}

/// Detector coordinate u = (row1 . h) / (row2 . h) in pixels. Throws
/// BehindSourceError for w <= 0.
template <typename Scalar>
Scalar project_point(const ProjectionMatrixT<Scalar>& P, const Eigen::Matrix<Scalar, 2, 1>& x) {
  const Scalar w = depth(P, x);
  if (!(w > Scalar(0))) throw BehindSourceError("point lies behind the source (w <= 0)");
  return (P(0, 0) * x.x() + P(0, 1) * x.y() + P(0, 2)) / w;
}

/// Derivatives of P * T(r, tx, ty) with respect to r, tx and ty.
template <typename Scalar>
std::array<ProjectionMatrixT<Scalar>, 3> rigid_jacobian(const ProjectionMatrixT<Scalar>& P, Scalar r, Scalar tx,
                                                        Scalar ty) {
  using std::cos;
  using std::sin;
  (void)tx;
  (void)ty;
  const Scalar c = cos(r);
  const Scalar s = sin(r);
  RigidTransformT<Scalar> dr;
  dr << -s, -c, Scalar(0),
         c, -s, Scalar(0),
         Scalar(0), Scalar(0), Scalar(0);
  ProjectionMatrixT<Scalar> d_tx = ProjectionMatrixT<Scalar>::Zero();
  ProjectionMatrixT<Scalar> d_ty = ProjectionMatrixT<Scalar>::Zero();
  d_tx.col(2) = P.col(0);
  d_ty.col(2) = P.col(1);
  return {P * dr, d_tx, d_ty};
}

/// Nominal circular trajectory. Source of view p sits at
/// d_si * (cos theta_p, sin theta_p), counterclockwise.
ProjectionMatrixStack make_circular_trajectory(const ScanGeometry& geom);

/// P'_p = P_p * T(r_p, tx_p, ty_p).
ProjectionMatrixStack apply_rigid(const ProjectionMatrixStack& P, const RigidParams& params);

/// Source position (null space of P), i.e. the point every ray passes through.
Vector2 source_position(const ProjectionMatrix& P);

}  // namespace geomopt
