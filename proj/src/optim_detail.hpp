#pragma once

#include <chrono>
#include <cmath>
#include <limits>
#include <string>

#include "geomopt/error.hpp"
#include "geomopt/optim.hpp"

namespace geomopt::detail {

/// Counts calls, records the trace and converts between g and z = g / scale.
class Evaluator {
 public:
  explicit Evaluator(Eigen::VectorXd scale)
      : scale_(std::move(scale)), start_(std::chrono::steady_clock::now()) {}

  Eigen::VectorXd to_g(const Eigen::VectorXd& z) const { return z.cwiseProduct(scale_); }
  Eigen::VectorXd to_z(const Eigen::VectorXd& g) const { return g.cwiseQuotient(scale_); }

  double value(const ValueFn& f, const Eigen::VectorXd& z) {
    const double v = f(to_g(z));
    ++nfev_;
    record(v);
    if (!std::isfinite(v)) throw NumericalError("objective returned a non-finite value");
    return v;
  }

  /// Fused value and z-space gradient.
  double value_grad(const GradFn& fg, const Eigen::VectorXd& z, Eigen::VectorXd& grad_z) {
    Eigen::VectorXd grad_g(z.size());
    const double v = fg(to_g(z), grad_g);
    ++nfev_;
    ++njev_;
    record(v);
    if (!std::isfinite(v)) throw NumericalError("objective returned a non-finite value");
    if (grad_g.size() != z.size() || !grad_g.allFinite())
      throw NumericalError("gradient is non-finite or has the wrong length");
    grad_z = grad_g.cwiseProduct(scale_);
    return v;
  }

  OptimizerResult finish(const Eigen::VectorXd& z_star, double f_star, Termination why, long iterations) {
    OptimizerResult r;
    r.g_star = to_g(z_star);
    r.f_star = f_star;
    r.nfev = nfev_;
    r.njev = njev_;
    r.iterations = iterations;
    r.wall_time_s = elapsed();
    r.termination = why;
    r.trace = std::move(trace_);
    return r;
  }

  long nfev() const { return nfev_; }

 private:
  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }
  void record(double v) {
    trace_.push_back({elapsed(), v});
  }

  Eigen::VectorXd scale_;
  std::chrono::steady_clock::time_point start_;
  long nfev_ = 0;
  long njev_ = 0;
  std::vector<TracePoint> trace_;
};

}  // namespace geomopt::detail
