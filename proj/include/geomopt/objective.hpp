#pragma once

#include <Eigen/Core>

#include "geomopt/motion.hpp"
#include "geomopt/recon.hpp"

namespace geomopt {

/// Everything the target function closes over. The filtered sinogram is
/// computed once: filtering uses the nominal geometry and does not depend on
/// the parameters.
struct CompensationProblem {
  FilteredSinogram filtered;
  ProjectionMatrixStack initial;
  Image reference;
  SplineMotionModel model;
  GridSpec grid;
  /// Restrict the MSE to the inscribed circle of the grid.
  bool fov_mask = false;
};

/// Filters `sino` once and reconstructs the reference from the nominal stack.
CompensationProblem make_problem(const Sinogram& sino, const ProjectionMatrixStack& initial,
                                 const ProjectionMatrixStack& nominal, const SplineMotionModel& model,
                                 const GridSpec& grid, bool fov_mask = false);

/// Mean squared difference over all pixels. Throws ShapeError on mismatch.
double mse(const Image& image, const Image& reference);

/// Reconstruction for parameters g.
Image reconstruct_with(const CompensationProblem& problem, const Eigen::VectorXd& g);

/// f(g) = mse(reconstruct(sino, m(g, P_init)), I_ref).
double objective_value(const CompensationProblem& problem, const Eigen::VectorXd& g);

struct ValueAndGradient {
  double value = 0.0;
  Eigen::VectorXd gradient;
};

/// f(g) and df/dg = df/dI * dI/dP * dP/dg in one reconstruction.
ValueAndGradient objective_grad(const CompensationProblem& problem, const Eigen::VectorXd& g);

}  // namespace geomopt
