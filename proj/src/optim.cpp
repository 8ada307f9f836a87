#include "geomopt/optim.hpp"

#include <cmath>

#include "geomopt/csv.hpp"
#include "geomopt/error.hpp"

namespace geomopt {

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::cma_es: return "cma_es";
    case Algorithm::nelder_mead: return "nelder_mead";
    case Algorithm::gradient_descent: return "gradient_descent";
    case Algorithm::bfgs: return "bfgs";
  }
  return "unknown";
}

Algorithm parse_algorithm(const std::string& name) {
  for (Algorithm a : all_algorithms())
    if (to_string(a) == name) return a;
  throw ConfigError("unknown algorithm '" + name + "'");
}

bool uses_gradient(Algorithm a) { return a == Algorithm::gradient_descent || a == Algorithm::bfgs; }

std::string to_string(Termination t) {
  switch (t) {
    case Termination::f_tol: return "f_tol";
    case Termination::max_fev: return "max_fev";
    case Termination::grad_tol: return "grad_tol";
    case Termination::max_iter: return "max_iter";
    case Termination::line_search_failure: return "line_search_failure";
    case Termination::f_target: return "f_target";
  }
  return "unknown";
}

Termination parse_termination(const std::string& name) {
  for (Termination t : {Termination::f_tol, Termination::max_fev, Termination::grad_tol, Termination::max_iter,
                        Termination::line_search_failure, Termination::f_target})
    if (to_string(t) == name) return t;
  throw ConfigError("unknown termination '" + name + "'");
}

void OptimizerConfig::validate(Eigen::Index n) const {
  if (n < 1) throw ConfigError("optimizer needs at least one parameter");
  if (scale.size() != 0) {
    if (scale.size() != n)
      throw ConfigError("scale vector has " + std::to_string(scale.size()) + " entries, expected " + std::to_string(n));
    if (!scale.allFinite() || (scale.array() <= 0.0).any())
      throw ConfigError("scale vector must be strictly positive");
  }
  if (std::isnan(f_target)) throw ConfigError("f_target must not be NaN");
  if (!(f_tol > 0.0) || !(grad_norm_tol > 0.0)) throw ConfigError("tolerances must be positive");
  if (max_fev < 1) throw ConfigError("max_fev must be >= 1");
  if (max_iter < 0) throw ConfigError("max_iter must be >= 0");
  if (!(gd_step > 0.0) || !(gd_decay > 0.0) || gd_decay > 1.0) throw ConfigError("invalid gradient-descent step");
  if (!(cma_sigma0 > 0.0)) throw ConfigError("cma_sigma0 must be positive");
  if (cma_lambda != 0 && cma_lambda < 2) throw ConfigError("cma_lambda must be >= 2");
  if (!(0.0 < wolfe_c1 && wolfe_c1 < wolfe_c2 && wolfe_c2 < 1.0)) throw ConfigError("need 0 < c1 < c2 < 1");
  if (max_line_search_evals < 1) throw ConfigError("max_line_search_evals must be >= 1");
}

Eigen::VectorXd OptimizerConfig::resolved_scale(Eigen::Index n) const {
  return scale.size() == 0 ? Eigen::VectorXd::Ones(n) : scale;
}

long OptimizerConfig::resolved_max_iter() const {
  if (max_iter > 0) return max_iter;
  return algorithm == Algorithm::gradient_descent ? 10000 : 500;
}

int OptimizerConfig::resolved_lambda(Eigen::Index n) const {
  if (cma_lambda > 0) return cma_lambda;
  return 4 + static_cast<int>(std::floor(3.0 * std::log(static_cast<double>(n))));
}

OptimizerResult minimize(const ValueFn& f, const GradFn& fg, const Eigen::VectorXd& g0, const OptimizerConfig& config) {
  switch (config.algorithm) {
    case Algorithm::cma_es: return cma_es(f, g0, config);
    case Algorithm::nelder_mead: return nelder_mead(f, g0, config);
    case Algorithm::gradient_descent: return gradient_descent(fg, g0, config);
    case Algorithm::bfgs: return bfgs(fg, g0, config);
  }
  throw ConfigError("unknown algorithm");
}

void write_trace_csv(const std::filesystem::path& path, const std::vector<TracePoint>& trace) {
  CsvTable table;
  table.header = {"elapsed_s", "f"};
  table.rows.reserve(trace.size());
  for (const auto& t : trace) table.rows.push_back({format_double(t.elapsed_s), format_double(t.value)});
  write_csv(path, table);
}

std::vector<TracePoint> read_trace_csv(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  const std::size_t ct = table.column("elapsed_s");
  const std::size_t cf = table.column("f");
  std::vector<TracePoint> out;
  out.reserve(table.rows.size());
  for (const auto& row : table.rows) out.push_back({std::stod(row[ct]), std::stod(row[cf])});
  return out;
}

}  // namespace geomopt
