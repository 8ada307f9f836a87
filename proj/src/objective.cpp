#include "geomopt/objective.hpp"

#include <cmath>

namespace geomopt {

namespace {

Grid inscribed_mask(const GridSpec& grid) {
  Grid mask = Grid::Zero(grid.size, grid.size);
  const double c = 0.5 * (grid.size - 1);
  const double r2 = 0.25 * grid.size * grid.size;
  for (int i = 0; i < grid.size; ++i)
    for (int j = 0; j < grid.size; ++j) {
      const double dx = j - c;
      const double dy = i - c;
      mask(i, j) = dx * dx + dy * dy <= r2 ? 1.0 : 0.0;
    }
  return mask;
}

struct Residual {
  Grid values;
  double count;
};

Residual residual(const CompensationProblem& problem, const Image& image) {
  if (image.rows() != problem.reference.rows() || image.cols() != problem.reference.cols())
    throw ShapeError("reconstruction and reference differ in shape");
  Residual r{image.values - problem.reference.values, static_cast<double>(image.values.size())};
  if (problem.fov_mask) {
    const Grid mask = inscribed_mask(problem.grid);
    r.values = r.values.cwiseProduct(mask);
    r.count = mask.sum();
  }
  return r;
}

}  // namespace

CompensationProblem make_problem(const Sinogram& sino, const ProjectionMatrixStack& initial,
                                 const ProjectionMatrixStack& nominal, const SplineMotionModel& model,
                                 const GridSpec& grid, bool fov_mask) {
  grid.validate();
  if (initial.size() != nominal.size() || initial.size() != static_cast<std::size_t>(model.num_projections()))
    throw ShapeError("initial/nominal stacks and motion model disagree on N_p");
  FilteredSinogram filtered = weight_and_filter(sino);
  Image reference = backproject(filtered, nominal, grid);
  return {std::move(filtered), initial, std::move(reference), model, grid, fov_mask};
}

double mse(const Image& image, const Image& reference) {
  if (image.rows() != reference.rows() || image.cols() != reference.cols())
    throw ShapeError("mse: images differ in shape");
  if (image.values.size() == 0) throw ShapeError("mse: empty image");
  return (image.values - reference.values).squaredNorm() / static_cast<double>(image.values.size());
}

Image reconstruct_with(const CompensationProblem& problem, const Eigen::VectorXd& g) {
  return backproject(problem.filtered, problem.model.apply(g, problem.initial), problem.grid);
}

double objective_value(const CompensationProblem& problem, const Eigen::VectorXd& g) {
  const Residual r = residual(problem, reconstruct_with(problem, g));
  return r.values.squaredNorm() / r.count;
}

ValueAndGradient objective_grad(const CompensationProblem& problem, const Eigen::VectorXd& g) {
  const ProjectionMatrixStack P = problem.model.apply(g, problem.initial);
  const Image image = backproject(problem.filtered, P, problem.grid);
  const Residual r = residual(problem, image);

  ValueAndGradient out;
  out.value = r.values.squaredNorm() / r.count;
  const Image cotangent((2.0 / r.count) * r.values, problem.grid.spacing);
  const GeometryGradient dP = backproject_vjp(problem.filtered, P, cotangent);
  out.gradient = problem.model.vjp(g, problem.initial, dP);
  return out;
}

}  // namespace geomopt
