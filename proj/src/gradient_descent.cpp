#include <cmath>

#include "geomopt/optim.hpp"
#include "optim_detail.hpp"

namespace geomopt {

double gd_step_size(const OptimizerConfig& config, long iteration) {
  return config.gd_step * std::pow(config.gd_decay, static_cast<double>(iteration));
}

OptimizerResult gradient_descent(const GradFn& fg, const Eigen::VectorXd& g0, const OptimizerConfig& config) {
  const Eigen::Index n = g0.size();
  config.validate(n);
  detail::Evaluator eval(config.resolved_scale(n));
  const long max_iter = config.resolved_max_iter();

  Eigen::VectorXd z = eval.to_z(g0);
  Eigen::VectorXd grad(n);
  long k = 0;
  while (true) {
    const double value = eval.value_grad(fg, z, grad);
    if (value <= config.f_target) return eval.finish(z, value, Termination::f_target, k);
    if (grad.norm() < config.grad_norm_tol) return eval.finish(z, value, Termination::grad_tol, k);
    if (k >= max_iter) return eval.finish(z, value, Termination::max_iter, k);
    z -= gd_step_size(config, k) * grad;
    ++k;
  }
}

}  // namespace geomopt
