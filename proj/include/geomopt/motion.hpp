#pragma once

#include <filesystem>
#include <random>

#include <Eigen/Core>

#include "geomopt/geometry.hpp"
#include "geomopt/recon.hpp"

namespace geomopt {

/// Peak rigid motion (rad, mm, mm); signs are folded into the values.
struct MotionAmplitudes {
  double rotation = 0.1;
  double translation_x = 10.0;
  double translation_y = 10.0;

  MotionAmplitudes scaled(double factor) const {
    return {rotation * factor, translation_x * factor, translation_y * factor};
  }
};

/// Motion that is zero up to p_start, ramps linearly, and holds its
/// amplitude from p_end to the end of the scan.
struct StepMotionPattern {
  int p_start = 0;
  int p_end = 1;
  MotionAmplitudes amplitudes;
};

RigidParams make_step_pattern(int num_projections, const StepMotionPattern& pattern);

/// Draws p_start/p_end with ramp length in [ramp_min, ramp_max] completed
/// within the scan, and independent +-1 signs per component. Magnitudes are
/// taken from `magnitudes` unchanged.
StepMotionPattern random_step_pattern(int num_projections, const MotionAmplitudes& magnitudes, std::mt19937_64& rng,
                                      int ramp_min = 50, int ramp_max = 200);

/// Natural cubic spline basis: B(p, k) is the spline through the k-th unit
/// vector at nodes equally spaced over [0, N_p - 1], evaluated at p.
Eigen::MatrixXd build_spline_basis(int num_nodes, int num_projections);

/// m(g, P): three natural cubic splines (rotation, tx, ty) over projection
/// index. Parameters are ordered [r nodes, tx nodes, ty nodes].
class SplineMotionModel {
 public:
  SplineMotionModel(int num_nodes, int num_projections);

  int num_nodes() const { return num_nodes_; }
  int num_projections() const { return num_projections_; }
  int num_parameters() const { return 3 * num_nodes_; }
  const Eigen::MatrixXd& basis() const { return basis_; }
  Eigen::VectorXd node_positions() const;

  /// Per-projection curves B * nodes for each component.
  RigidParams curves(const Eigen::VectorXd& g) const;

  ProjectionMatrixStack apply(const Eigen::VectorXd& g, const ProjectionMatrixStack& P_init) const;

  /// (dP/dg)^T applied to a geometry cotangent.
  Eigen::VectorXd vjp(const Eigen::VectorXd& g, const ProjectionMatrixStack& P_init,
                      const GeometryGradient& cotangent) const;

  /// Least-squares node values for target per-projection curves.
  Eigen::VectorXd fit(const RigidParams& target) const;

 private:
  void check_parameters(const Eigen::VectorXd& g) const;

  int num_nodes_;
  int num_projections_;
  Eigen::MatrixXd basis_;
};

/// Motion that exactly undoes `motion`: T(inverse_p) = T(motion_p)^-1.
RigidParams invert_rigid(const RigidParams& motion);

/// CSV with header projection,r_rad,tx_mm,ty_mm.
void write_motion_csv(const std::filesystem::path& path, const RigidParams& motion);
RigidParams read_motion_csv(const std::filesystem::path& path);

}  // namespace geomopt
