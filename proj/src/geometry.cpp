#include "geomopt/geometry.hpp"

#include <Eigen/Geometry>

#include <string>

namespace geomopt {

void ScanGeometry::validate() const {
  const auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!positive(source_isocenter_distance) || !positive(source_detector_distance) || !positive(detector_spacing))
    throw ConfigError("scan geometry distances must be finite and strictly positive");
  if (source_detector_distance <= source_isocenter_distance)
    throw ConfigError("source-detector distance must exceed source-isocenter distance");
  if (num_projections < 1) throw ConfigError("num_projections must be >= 1");
  if (num_detector_pixels < 2) throw ConfigError("num_detector_pixels must be >= 2");
  if (!std::isfinite(angular_range) || !std::isfinite(start_angle))
    throw ConfigError("scan angles must be finite");
}

RigidParams RigidParams::zeros(int num_projections) {
  return {Eigen::VectorXd::Zero(num_projections), Eigen::VectorXd::Zero(num_projections),
          Eigen::VectorXd::Zero(num_projections)};
}

void RigidParams::validate() const {
  if (translation_x.size() != rotation.size() || translation_y.size() != rotation.size())
    throw ShapeError("rigid parameter arrays differ in length");
  if (!rotation.allFinite() || !translation_x.allFinite() || !translation_y.allFinite())
    throw ConfigError("rigid parameters must be finite");
}

ProjectionMatrixStack make_circular_trajectory(const ScanGeometry& geom) {
  geom.validate();
  const double d_si = geom.source_isocenter_distance;
  const double focal = geom.source_detector_distance / geom.detector_spacing;
  const double c_u = geom.principal_point();

  std::vector<ProjectionMatrix> matrices(static_cast<std::size_t>(geom.num_projections));
  for (int p = 0; p < geom.num_projections; ++p) {
    const double theta = geom.angle(p);
    const Vector2 source = d_si * Vector2(std::cos(theta), std::sin(theta));
    const Vector2 lateral(-std::sin(theta), std::cos(theta));
    const Vector2 axis = -Vector2(std::cos(theta), std::sin(theta));

    ProjectionMatrix& P = matrices[static_cast<std::size_t>(p)];
    P.row(0).head<2>() = focal * lateral.transpose() + c_u * axis.transpose();
    P(0, 2) = focal * (-lateral.dot(source)) + c_u * d_si;
    P.row(1).head<2>() = axis.transpose();
    P(1, 2) = d_si;
  }
  return ProjectionMatrixStack(std::move(matrices));
}

ProjectionMatrixStack apply_rigid(const ProjectionMatrixStack& P, const RigidParams& params) {
  params.validate();
  if (static_cast<std::size_t>(params.size()) != P.size())
    throw ShapeError("rigid parameters have " + std::to_string(params.size()) + " entries, stack has " +
                     std::to_string(P.size()));
  std::vector<ProjectionMatrix> out(P.size());
  for (std::size_t p = 0; p < P.size(); ++p) {
    const auto i = static_cast<Eigen::Index>(p);
    out[p].noalias() = P[p] * rigid_transform(params.rotation[i], params.translation_x[i], params.translation_y[i]);
  }
  return ProjectionMatrixStack(std::move(out));
}

Vector2 source_position(const ProjectionMatrix& P) {
  const Eigen::Vector3d a = P.row(0).transpose();
  const Eigen::Vector3d b = P.row(1).transpose();
  const Eigen::Vector3d k = a.cross(b);
  return k.head<2>() / k.z();
}

}  // namespace geomopt
