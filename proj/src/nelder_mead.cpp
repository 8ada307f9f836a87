#include <algorithm>
#include <numeric>
#include <vector>

#include "geomopt/optim.hpp"
#include "optim_detail.hpp"

namespace geomopt {

namespace {

constexpr double kReflect = 1.0;
constexpr double kExpand = 2.0;
constexpr double kContract = 0.5;
constexpr double kShrink = 0.5;

}  // namespace

OptimizerResult nelder_mead(const ValueFn& f, const Eigen::VectorXd& g0, const OptimizerConfig& config) {
  const Eigen::Index n = g0.size();
  config.validate(n);
  detail::Evaluator eval(config.resolved_scale(n));

  // Vertices in z = g / scale, so a 0.1 offset in z is 0.1 * scale in g.
  std::vector<Eigen::VectorXd> simplex;
  std::vector<double> values;
  simplex.reserve(static_cast<std::size_t>(n + 1));
  simplex.push_back(eval.to_z(g0));
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd v = simplex.front();
    v[i] += 0.1;
    simplex.push_back(std::move(v));
  }

  Termination why = Termination::max_fev;
  long iterations = 0;
  for (const auto& v : simplex) {
    if (eval.nfev() >= config.max_fev) break;
    values.push_back(eval.value(f, v));
    if (values.back() <= config.f_target) {
      why = Termination::f_target;
      break;
    }
  }

  std::vector<std::size_t> order(simplex.size());
  const auto sort_simplex = [&] {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<Eigen::VectorXd> s2;
    std::vector<double> v2;
    for (std::size_t i : order) {
      s2.push_back(std::move(simplex[i]));
      v2.push_back(values[i]);
    }
    simplex = std::move(s2);
    values = std::move(v2);
  };

  if (values.size() == simplex.size()) {
    const std::size_t worst = simplex.size() - 1;
    while (true) {
      sort_simplex();
      if (values[0] <= config.f_target) {
        why = Termination::f_target;
        break;
      }
      if (values[worst] - values[0] < config.f_tol) {
        why = Termination::f_tol;
        break;
      }
      if (eval.nfev() >= config.max_fev) {
        why = Termination::max_fev;
        break;
      }
      ++iterations;

      Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
      for (std::size_t i = 0; i < worst; ++i) centroid += simplex[i];
      centroid /= static_cast<double>(n);

      const Eigen::VectorXd xr = centroid + kReflect * (centroid - simplex[worst]);
      const double fr = eval.value(f, xr);
      bool shrink = false;
      if (fr < values[0]) {
        const Eigen::VectorXd xe = centroid + kExpand * (xr - centroid);
        const double fe = eval.value(f, xe);
        if (fe < fr) {
          simplex[worst] = xe;
          values[worst] = fe;
        } else {
          simplex[worst] = xr;
          values[worst] = fr;
        }
      } else if (fr < values[worst - 1]) {
        simplex[worst] = xr;
        values[worst] = fr;
      } else if (fr < values[worst]) {
        const Eigen::VectorXd xc = centroid + kContract * (xr - centroid);
        const double fc = eval.value(f, xc);
        if (fc <= fr) {
          simplex[worst] = xc;
          values[worst] = fc;
        } else {
          shrink = true;
        }
      } else {
        const Eigen::VectorXd xcc = centroid + kContract * (simplex[worst] - centroid);
        const double fcc = eval.value(f, xcc);
        if (fcc < values[worst]) {
          simplex[worst] = xcc;
          values[worst] = fcc;
        } else {
          shrink = true;
        }
      }
      if (shrink) {
        for (std::size_t i = 1; i < simplex.size(); ++i) {
          simplex[i] = simplex[0] + kShrink * (simplex[i] - simplex[0]);
          values[i] = eval.value(f, simplex[i]);
        }
      }
    }
  }

  const auto best = static_cast<std::size_t>(std::min_element(values.begin(), values.end()) - values.begin());
  return eval.finish(simplex[best], values[best], why, iterations);
}

}  // namespace geomopt
