#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/Eigenvalues>

#include "geomopt/optim.hpp"
#include "optim_detail.hpp"

namespace geomopt {

OptimizerResult cma_es(const ValueFn& f, const Eigen::VectorXd& g0, const OptimizerConfig& config) {
  const Eigen::Index n = g0.size();
  config.validate(n);
  detail::Evaluator eval(config.resolved_scale(n));
  std::mt19937_64 rng(config.rng_seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  const double N = static_cast<double>(n);
  const int lambda = config.resolved_lambda(n);
  const int mu = lambda / 2;
  Eigen::VectorXd weights(mu);
  for (int i = 0; i < mu; ++i) weights[i] = std::log(mu + 0.5) - std::log(i + 1.0);
  weights /= weights.sum();
  const double mueff = 1.0 / weights.squaredNorm();

  const double cc = (4.0 + mueff / N) / (N + 4.0 + 2.0 * mueff / N);
  const double cs = (mueff + 2.0) / (N + mueff + 5.0);
  const double c1 = 2.0 / ((N + 1.3) * (N + 1.3) + mueff);
  const double cmu = std::min(1.0 - c1, 2.0 * (mueff - 2.0 + 1.0 / mueff) / ((N + 2.0) * (N + 2.0) + mueff));
  const double damps = 1.0 + 2.0 * std::max(0.0, std::sqrt((mueff - 1.0) / (N + 1.0)) - 1.0) + cs;
  const double chi_n = std::sqrt(N) * (1.0 - 1.0 / (4.0 * N) + 1.0 / (21.0 * N * N));

  Eigen::VectorXd mean = eval.to_z(g0);
  double sigma = config.cma_sigma0;
  Eigen::VectorXd pc = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd ps = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd B = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd D = Eigen::VectorXd::Ones(n);
  Eigen::MatrixXd C = Eigen::MatrixXd::Identity(n, n);

  Eigen::VectorXd best_z = mean;
  double best_f = eval.value(f, mean);
  if (best_f <= config.f_target) return eval.finish(best_z, best_f, Termination::f_target, 0);
  double previous_generation_best = std::numeric_limits<double>::quiet_NaN();

  Eigen::MatrixXd arz(n, lambda);
  Eigen::MatrixXd ary(n, lambda);
  std::vector<double> fitness(static_cast<std::size_t>(lambda));
  std::vector<int> order(static_cast<std::size_t>(lambda));

  long generation = 0;
  Termination why = Termination::max_fev;
  while (true) {
    if (eval.nfev() + lambda > config.max_fev) {
      why = Termination::max_fev;
      break;
    }
    for (int k = 0; k < lambda; ++k)
      for (Eigen::Index i = 0; i < n; ++i) arz(i, k) = normal(rng);
    ary.noalias() = B * D.asDiagonal() * arz;
    for (int k = 0; k < lambda; ++k) {
      const Eigen::VectorXd z = mean + sigma * ary.col(k);
      fitness[static_cast<std::size_t>(k)] = eval.value(f, z);
      if (fitness[static_cast<std::size_t>(k)] < best_f) {
        best_f = fitness[static_cast<std::size_t>(k)];
        best_z = z;
      }
      if (best_f <= config.f_target) return eval.finish(best_z, best_f, Termination::f_target, generation + 1);
    }
    ++generation;

    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return fitness[static_cast<std::size_t>(a)] < fitness[static_cast<std::size_t>(b)]; });

    Eigen::VectorXd y_w = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < mu; ++i) y_w += weights[i] * ary.col(order[static_cast<std::size_t>(i)]);
    mean += sigma * y_w;

    // C^{-1/2} y_w = B D^{-1} B^T y_w
    const Eigen::VectorXd c_inv_sqrt_yw = B * (B.transpose() * y_w).cwiseQuotient(D);
    ps = (1.0 - cs) * ps + std::sqrt(cs * (2.0 - cs) * mueff) * c_inv_sqrt_yw;
    const double ps_norm = ps.norm();
    const double hsig_denominator = std::sqrt(1.0 - std::pow(1.0 - cs, 2.0 * static_cast<double>(generation)));
    const bool hsig = ps_norm / hsig_denominator / chi_n < 1.4 + 2.0 / (N + 1.0);
    pc = (1.0 - cc) * pc + (hsig ? std::sqrt(cc * (2.0 - cc) * mueff) : 0.0) * y_w;

    Eigen::MatrixXd rank_mu = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < mu; ++i) {
      const auto y = ary.col(order[static_cast<std::size_t>(i)]);
      rank_mu.noalias() += weights[i] * y * y.transpose();
    }
    const double hsig_correction = hsig ? 0.0 : cc * (2.0 - cc);
    C = (1.0 - c1 - cmu) * C + c1 * (pc * pc.transpose() + hsig_correction * C) + cmu * rank_mu;
    C = 0.5 * (C + C.transpose()).eval();

    sigma *= std::exp((cs / damps) * (ps_norm / chi_n - 1.0));

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(C);
    B = solver.eigenvectors();
    D = solver.eigenvalues().cwiseMax(1e-300).cwiseSqrt();

    const double generation_best = fitness[static_cast<std::size_t>(order.front())];
    const double generation_spread = fitness[static_cast<std::size_t>(order.back())] - generation_best;
    const bool settled = !std::isnan(previous_generation_best) &&
                         std::abs(generation_best - previous_generation_best) < config.f_tol &&
                         generation_spread < config.f_tol;
    previous_generation_best = generation_best;
    if (settled) {
      why = Termination::f_tol;
      break;
    }
  }
  return eval.finish(best_z, best_f, why, generation);
}

}  // namespace geomopt
