#include "geomopt/motion.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "geomopt/csv.hpp"

namespace geomopt {

RigidParams make_step_pattern(int num_projections, const StepMotionPattern& pattern) {
  if (num_projections < 2) throw ConfigError("step pattern needs at least two projections");
  if (pattern.p_start < 0 || pattern.p_start >= pattern.p_end || pattern.p_end > num_projections - 1)
    throw ConfigError("step pattern needs 0 <= p_start < p_end <= N_p - 1");

  RigidParams out = RigidParams::zeros(num_projections);
  const double ramp = pattern.p_end - pattern.p_start;
  for (int p = 0; p < num_projections; ++p) {
    double fraction = 0.0;
    if (p >= pattern.p_end) {
      fraction = 1.0;
    } else if (p > pattern.p_start) {
      fraction = (p - pattern.p_start) / ramp;
    }
    out.rotation[p] = fraction * pattern.amplitudes.rotation;
    out.translation_x[p] = fraction * pattern.amplitudes.translation_x;
    out.translation_y[p] = fraction * pattern.amplitudes.translation_y;
  }
  return out;
}

StepMotionPattern random_step_pattern(int num_projections, const MotionAmplitudes& magnitudes, std::mt19937_64& rng,
                                      int ramp_min, int ramp_max) {
  if (ramp_min < 1 || ramp_max < ramp_min) throw ConfigError("invalid ramp length range");
  if (ramp_min > num_projections - 1) throw ConfigError("ramp does not fit into the scan");
  ramp_max = std::min(ramp_max, num_projections - 1);

  std::uniform_int_distribution<int> length_dist(ramp_min, ramp_max);
  const int length = length_dist(rng);
  std::uniform_int_distribution<int> start_dist(0, num_projections - 1 - length);
  StepMotionPattern pattern;
  pattern.p_start = start_dist(rng);
  pattern.p_end = pattern.p_start + length;
  std::bernoulli_distribution coin(0.5);
  const auto sign = [&] { return coin(rng) ? 1.0 : -1.0; };
  pattern.amplitudes.rotation = sign() * std::abs(magnitudes.rotation);
  pattern.amplitudes.translation_x = sign() * std::abs(magnitudes.translation_x);
  pattern.amplitudes.translation_y = sign() * std::abs(magnitudes.translation_y);
  return pattern;
}

namespace {

double node_position(int k, int num_nodes, int num_projections) {
  return static_cast<double>(k) * (num_projections - 1) / (num_nodes - 1);
}

// Maps node values to node second derivatives (natural end conditions).
Eigen::MatrixXd second_derivative_operator(int num_nodes, double h) {
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(num_nodes, num_nodes);
  const int interior = num_nodes - 2;
  if (interior <= 0) return D;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(interior, interior);
  Eigen::MatrixXd R = Eigen::MatrixXd::Zero(interior, num_nodes);
  for (int r = 0; r < interior; ++r) {
    A(r, r) = 4.0;
    if (r > 0) A(r, r - 1) = 1.0;
    if (r + 1 < interior) A(r, r + 1) = 1.0;
    const double c = 6.0 / (h * h);
    R(r, r) = c;
    R(r, r + 1) = -2.0 * c;
    R(r, r + 2) = c;
  }
  D.middleRows(1, interior) = A.partialPivLu().solve(R);
  return D;
}

}  // namespace

Eigen::MatrixXd build_spline_basis(int num_nodes, int num_projections) {
  if (num_nodes < 2 || num_nodes > num_projections)
    throw ConfigError("spline needs 2 <= N_n <= N_p, got N_n = " + std::to_string(num_nodes));

  const double h = static_cast<double>(num_projections - 1) / (num_nodes - 1);
  const Eigen::MatrixXd D = second_derivative_operator(num_nodes, h);
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(num_projections, num_nodes);
  for (int p = 0; p < num_projections; ++p) {
    int k = static_cast<int>(std::floor(p / h));
    k = std::clamp(k, 0, num_nodes - 2);
    const double left = node_position(k, num_nodes, num_projections);
    const double right = node_position(k + 1, num_nodes, num_projections);
    const double a = (right - p) / h;
    const double b = (p - left) / h;
    // S(p) = a y_k + b y_k+1 + ((a^3 - a) M_k + (b^3 - b) M_k+1) h^2 / 6
    B(p, k) += a;
    B(p, k + 1) += b;
    const double ca = (a * a * a - a) * h * h / 6.0;
    const double cb = (b * b * b - b) * h * h / 6.0;
    B.row(p) += ca * D.row(k) + cb * D.row(k + 1);
  }
  return B;
}

SplineMotionModel::SplineMotionModel(int num_nodes, int num_projections)
    : num_nodes_(num_nodes), num_projections_(num_projections),
      basis_(build_spline_basis(num_nodes, num_projections)) {}

Eigen::VectorXd SplineMotionModel::node_positions() const {
  Eigen::VectorXd pos(num_nodes_);
  for (int k = 0; k < num_nodes_; ++k) pos[k] = node_position(k, num_nodes_, num_projections_);
  return pos;
}

void SplineMotionModel::check_parameters(const Eigen::VectorXd& g) const {
  if (g.size() != num_parameters())
    throw ShapeError("motion model expects " + std::to_string(num_parameters()) + " parameters, got " +
                     std::to_string(g.size()));
}

RigidParams SplineMotionModel::curves(const Eigen::VectorXd& g) const {
  check_parameters(g);
  const int n = num_nodes_;
  return {basis_ * g.segment(0, n), basis_ * g.segment(n, n), basis_ * g.segment(2 * n, n)};
}

ProjectionMatrixStack SplineMotionModel::apply(const Eigen::VectorXd& g, const ProjectionMatrixStack& P_init) const {
  if (P_init.size() != static_cast<std::size_t>(num_projections_))
    throw ShapeError("motion model built for " + std::to_string(num_projections_) + " projections, stack has " +
                     std::to_string(P_init.size()));
  return apply_rigid(P_init, curves(g));
}

Eigen::VectorXd SplineMotionModel::vjp(const Eigen::VectorXd& g, const ProjectionMatrixStack& P_init,
                                       const GeometryGradient& cotangent) const {
  check_parameters(g);
  if (P_init.size() != static_cast<std::size_t>(num_projections_) || cotangent.size() != P_init.size())
    throw ShapeError("motion model vjp: stack/cotangent size mismatch");

  const RigidParams c = curves(g);
  Eigen::VectorXd d_r(num_projections_), d_tx(num_projections_), d_ty(num_projections_);
  for (int p = 0; p < num_projections_; ++p) {
    const auto J = rigid_jacobian(P_init[static_cast<std::size_t>(p)], c.rotation[p], c.translation_x[p],
                                  c.translation_y[p]);
    const ProjectionMatrix& G = cotangent.values[static_cast<std::size_t>(p)];
    d_r[p] = G.cwiseProduct(J[0]).sum();
    d_tx[p] = G.cwiseProduct(J[1]).sum();
    d_ty[p] = G.cwiseProduct(J[2]).sum();
  }
  Eigen::VectorXd out(num_parameters());
  out.segment(0, num_nodes_).noalias() = basis_.transpose() * d_r;
  out.segment(num_nodes_, num_nodes_).noalias() = basis_.transpose() * d_tx;
  out.segment(2 * num_nodes_, num_nodes_).noalias() = basis_.transpose() * d_ty;
  return out;
}

Eigen::VectorXd SplineMotionModel::fit(const RigidParams& target) const {
  target.validate();
  if (target.size() != num_projections_) throw ShapeError("fit target length differs from N_p");
  const auto qr = basis_.colPivHouseholderQr();
  Eigen::VectorXd g(num_parameters());
  g.segment(0, num_nodes_) = qr.solve(target.rotation);
  g.segment(num_nodes_, num_nodes_) = qr.solve(target.translation_x);
  g.segment(2 * num_nodes_, num_nodes_) = qr.solve(target.translation_y);
  return g;
}

RigidParams invert_rigid(const RigidParams& motion) {
  motion.validate();
  RigidParams out = RigidParams::zeros(static_cast<int>(motion.size()));
  for (Eigen::Index p = 0; p < motion.size(); ++p) {
    const double c = std::cos(motion.rotation[p]);
    const double s = std::sin(motion.rotation[p]);
    const double tx = motion.translation_x[p];
    const double ty = motion.translation_y[p];
    out.rotation[p] = -motion.rotation[p];
    out.translation_x[p] = -(c * tx + s * ty);
    out.translation_y[p] = -(-s * tx + c * ty);
  }
  return out;
}

void write_motion_csv(const std::filesystem::path& path, const RigidParams& motion) {
  motion.validate();
  CsvTable table;
  table.header = {"projection", "r_rad", "tx_mm", "ty_mm"};
  for (Eigen::Index p = 0; p < motion.size(); ++p)
    table.rows.push_back({std::to_string(p), format_double(motion.rotation[p]), format_double(motion.translation_x[p]),
                          format_double(motion.translation_y[p])});
  write_csv(path, table);
}

RigidParams read_motion_csv(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  const std::size_t cr = table.column("r_rad");
  const std::size_t cx = table.column("tx_mm");
  const std::size_t cy = table.column("ty_mm");
  RigidParams out = RigidParams::zeros(static_cast<int>(table.rows.size()));
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto p = static_cast<Eigen::Index>(i);
    out.rotation[p] = std::stod(table.rows[i][cr]);
    out.translation_x[p] = std::stod(table.rows[i][cx]);
    out.translation_y[p] = std::stod(table.rows[i][cy]);
  }
  return out;
}

}  // namespace geomopt
