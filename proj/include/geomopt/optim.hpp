#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace geomopt {

enum class Algorithm { cma_es, nelder_mead, gradient_descent, bfgs };

std::string to_string(Algorithm a);
/// Accepts the snake_case names ("cma_es", "nelder_mead", ...). Throws ConfigError.
Algorithm parse_algorithm(const std::string& name);
bool uses_gradient(Algorithm a);
inline const std::vector<Algorithm>& all_algorithms() {
  static const std::vector<Algorithm> list = {Algorithm::cma_es, Algorithm::nelder_mead, Algorithm::gradient_descent,
                                              Algorithm::bfgs};
  return list;
}

enum class Termination { f_tol, max_fev, grad_tol, max_iter, line_search_failure, f_target };
std::string to_string(Termination t);
Termination parse_termination(const std::string& name);

/// Optimizer settings. All algorithms work in pre-scaled coordinates
/// z = g / scale, so tolerances on gradients and step sizes refer to z.
struct OptimizerConfig {
  Algorithm algorithm = Algorithm::bfgs;
  /// Per-coordinate units; empty means all ones.
  Eigen::VectorXd scale;
  double f_tol = 0.1;
  /// Stop as soon as an evaluated value is <= f_target (a known lower bound).
  double f_target = -std::numeric_limits<double>::infinity();
  long max_fev = 20000;
  double grad_norm_tol = 2.0;
  /// 0 selects the algorithm default (500 for BFGS, 10000 for gradient descent).
  long max_iter = 0;
  double gd_step = 0.5;
  double gd_decay = 0.995;
  double cma_sigma0 = 1.0;
  /// 0 selects 4 + floor(3 ln N).
  int cma_lambda = 0;
  std::uint64_t rng_seed = 0;
  double wolfe_c1 = 1e-4;
  double wolfe_c2 = 0.9;
  int max_line_search_evals = 20;

  /// Throws ConfigError for non-positive tolerances/scales or a scale of the
  /// wrong length.
  void validate(Eigen::Index n) const;
  Eigen::VectorXd resolved_scale(Eigen::Index n) const;
  long resolved_max_iter() const;
  int resolved_lambda(Eigen::Index n) const;
};

struct TracePoint {
  double elapsed_s = 0.0;
  double value = 0.0;
};

struct OptimizerResult {
  Eigen::VectorXd g_star;
  double f_star = 0.0;
  long nfev = 0;
  long njev = 0;
  long iterations = 0;
  double wall_time_s = 0.0;
  Termination termination = Termination::max_iter;
  /// One entry per objective evaluation, in call order.
  std::vector<TracePoint> trace;
};

using ValueFn = std::function<double(const Eigen::VectorXd&)>;
/// Returns f(g) and writes df/dg into the second argument.
using GradFn = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

/// (mu/mu_w, lambda)-CMA-ES with rank-one and rank-mu updates and cumulative
/// step-size adaptation. Stops when both the spread of the current
/// generation and the change of the generation-best value drop below f_tol.
OptimizerResult cma_es(const ValueFn& f, const Eigen::VectorXd& g0, const OptimizerConfig& config);

/// Nelder-Mead with reflection 1, expansion 2, contractions 0.5, shrink 0.5.
OptimizerResult nelder_mead(const ValueFn& f, const Eigen::VectorXd& g0, const OptimizerConfig& config);

/// z <- z - gd_step * gd_decay^k * grad_z f.
OptimizerResult gradient_descent(const GradFn& fg, const Eigen::VectorXd& g0, const OptimizerConfig& config);
double gd_step_size(const OptimizerConfig& config, long iteration);

/// BFGS with inverse Hessian initialised to diag(scale^2) and a strong-Wolfe
/// line search.
OptimizerResult bfgs(const GradFn& fg, const Eigen::VectorXd& g0, const OptimizerConfig& config);

/// Dispatches on config.algorithm. Gradient-free algorithms only call `f`.
OptimizerResult minimize(const ValueFn& f, const GradFn& fg, const Eigen::VectorXd& g0, const OptimizerConfig& config);

/// CSV with header elapsed_s,f.
void write_trace_csv(const std::filesystem::path& path, const std::vector<TracePoint>& trace);
std::vector<TracePoint> read_trace_csv(const std::filesystem::path& path);

}  // namespace geomopt
