#include <cmath>
#include <optional>

#include "geomopt/optim.hpp"
#include "optim_detail.hpp"

namespace geomopt {

namespace {

struct LinePoint {
  double alpha = 0.0;
  double phi = 0.0;
  double dphi = 0.0;
  Eigen::VectorXd z;
  Eigen::VectorXd grad;
};

// Minimiser of the cubic matching phi and phi' at a and b; NaN if none.
double cubic_minimizer(const LinePoint& a, const LinePoint& b) {
  const double d1 = a.dphi + b.dphi - 3.0 * (a.phi - b.phi) / (a.alpha - b.alpha);
  const double radicand = d1 * d1 - a.dphi * b.dphi;
  if (!(radicand >= 0.0)) return std::nan("");
  const double d2 = std::copysign(std::sqrt(radicand), b.alpha - a.alpha);
  const double denom = b.dphi - a.dphi + 2.0 * d2;
  if (denom == 0.0) return std::nan("");
  return b.alpha - (b.alpha - a.alpha) * (b.dphi + d2 - d1) / denom;
}

/// Strong-Wolfe search along z + alpha * dir (bracketing phase, then zoom with
/// safeguarded cubic interpolation).
class WolfeSearch {
 public:
  WolfeSearch(detail::Evaluator& eval, const GradFn& fg, const Eigen::VectorXd& z, const Eigen::VectorXd& dir,
              const LinePoint& start, const OptimizerConfig& config)
      : eval_(eval), fg_(fg), z_(z), dir_(dir), start_(start), config_(config) {}

  /// The accepted point, or nullopt when the evaluation budget runs out. On
  /// failure, best_decrease() holds the best sufficient-decrease point seen.
  std::optional<LinePoint> run(double alpha1) {
    LinePoint prev = start_;
    double alpha = alpha1;
    for (int i = 1;; ++i) {
      if (evals_ >= config_.max_line_search_evals) return std::nullopt;
      LinePoint cur = evaluate(alpha);
      if (!armijo(cur) || (i > 1 && cur.phi >= prev.phi)) return zoom(prev, cur);
      if (curvature(cur)) return cur;
      if (cur.dphi >= 0.0) return zoom(cur, prev);
      prev = std::move(cur);
      alpha *= 2.0;
    }
  }

  const std::optional<LinePoint>& best_decrease() const { return best_; }

 private:
  bool armijo(const LinePoint& p) const {
    return p.phi <= start_.phi + config_.wolfe_c1 * p.alpha * start_.dphi;
  }
  bool curvature(const LinePoint& p) const { return std::abs(p.dphi) <= -config_.wolfe_c2 * start_.dphi; }

  LinePoint evaluate(double alpha) {
    ++evals_;
    LinePoint p;
    p.alpha = alpha;
    p.z = z_ + alpha * dir_;
    p.phi = eval_.value_grad(fg_, p.z, p.grad);
    p.dphi = p.grad.dot(dir_);
    if (armijo(p) && p.phi < start_.phi && (!best_ || p.phi < best_->phi)) best_ = p;
    return p;
  }

  std::optional<LinePoint> zoom(LinePoint lo, LinePoint hi) {
    while (evals_ < config_.max_line_search_evals) {
      const double left = std::min(lo.alpha, hi.alpha);
      const double right = std::max(lo.alpha, hi.alpha);
      const double width = right - left;
      double alpha = cubic_minimizer(lo, hi);
      if (!(alpha > left + 0.1 * width && alpha < right - 0.1 * width)) alpha = 0.5 * (left + right);
      LinePoint cur = evaluate(alpha);
      if (!armijo(cur) || cur.phi >= lo.phi) {
        hi = std::move(cur);
      } else {
        if (curvature(cur)) return cur;
        if (cur.dphi * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
        lo = std::move(cur);
      }
    }
    return std::nullopt;
  }

  detail::Evaluator& eval_;
  const GradFn& fg_;
  const Eigen::VectorXd& z_;
  const Eigen::VectorXd& dir_;
  const LinePoint& start_;
  const OptimizerConfig& config_;
  int evals_ = 0;
  std::optional<LinePoint> best_;
};

}  // namespace

OptimizerResult bfgs(const GradFn& fg, const Eigen::VectorXd& g0, const OptimizerConfig& config) {
  const Eigen::Index n = g0.size();
  config.validate(n);
  detail::Evaluator eval(config.resolved_scale(n));
  const long max_iter = config.resolved_max_iter();

  // In z = g / scale the identity corresponds to diag(scale^2) in g.
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
  LinePoint cur;
  cur.z = eval.to_z(g0);
  cur.phi = eval.value_grad(fg, cur.z, cur.grad);
  double previous_phi = cur.phi + 0.5 * cur.grad.norm();

  for (long k = 0;; ++k) {
    if (cur.phi <= config.f_target) return eval.finish(cur.z, cur.phi, Termination::f_target, k);
    if (cur.grad.norm() < config.grad_norm_tol) return eval.finish(cur.z, cur.phi, Termination::grad_tol, k);
    if (k >= max_iter) return eval.finish(cur.z, cur.phi, Termination::max_iter, k);

    Eigen::VectorXd dir = -H * cur.grad;
    cur.dphi = cur.grad.dot(dir);
    if (!(cur.dphi < 0.0)) {
      H.setIdentity();
      dir = -cur.grad;
      cur.dphi = cur.grad.dot(dir);
    }
    double alpha1 = std::min(1.0, 1.01 * 2.0 * (cur.phi - previous_phi) / cur.dphi);
    if (!(alpha1 > 0.0)) alpha1 = 1.0;

    cur.alpha = 0.0;
    WolfeSearch search(eval, fg, cur.z, dir, cur, config);
    std::optional<LinePoint> next = search.run(alpha1);
    if (!next) {
      const auto& fallback = search.best_decrease();
      if (fallback) return eval.finish(fallback->z, fallback->phi, Termination::line_search_failure, k + 1);
      return eval.finish(cur.z, cur.phi, Termination::line_search_failure, k);
    }

    const Eigen::VectorXd s = next->z - cur.z;
    const Eigen::VectorXd y = next->grad - cur.grad;
    previous_phi = cur.phi;
    cur = std::move(*next);

    const double sy = s.dot(y);
    if (sy > 1e-10) {
      const double rho = 1.0 / sy;
      const Eigen::VectorXd Hy = H * y;
      const double yHy = y.dot(Hy);
      H.noalias() -= rho * (s * Hy.transpose() + Hy * s.transpose());
      H.noalias() += (rho * rho * yHy + rho) * (s * s.transpose());
    }
  }
}

}  // namespace geomopt
