// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.
//
//   GEOMOPT_ACCEPT_ONLY=1,2,8   run a subset
//   GEOMOPT_ACCEPT_OUT=<dir>    where records are written (default ./acceptance_out)

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "geomopt/bench.hpp"
#include "geomopt/parallel.hpp"
#include "geomopt/phantom.hpp"
#include "geomopt/projector.hpp"
#include "geomopt/recon.hpp"

using namespace geomopt;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

fs::path out_root() {
  const char* env = std::getenv("GEOMOPT_ACCEPT_OUT");
  return env != nullptr ? fs::path(env) : fs::path("acceptance_out");
}

std::set<int> selected() {
  std::set<int> ids;
  const char* env = std::getenv("GEOMOPT_ACCEPT_ONLY");
  if (env == nullptr || *env == '\0') {
    for (int i = 1; i <= 9; ++i) ids.insert(i);
    return ids;
  }
  std::stringstream ss(env);
  std::string item;
  while (std::getline(ss, item, ',')) ids.insert(std::stoi(item));
  return ids;
}

void progress(const TrialRecord& r) {
  std::fprintf(stderr, "  %-16s seed %3llu phantom %d factor %.1f nodes %3d rel %.3e nfev %6ld njev %5ld %7.1f s %s\n",
               to_string(r.algorithm).c_str(), static_cast<unsigned long long>(r.seed), r.phantom_id,
               r.amplitude_factor, r.num_nodes, r.relative_mse, r.nfev, r.njev, r.wall_time_s,
               to_string(r.termination).c_str());
}

// ---------------------------------------------------------------------------

Outcome gradient_fidelity() {
  Outcome o;
  ExperimentConfig c;
  c.phantom.size = 128;
  c.geometry.num_projections = 180;
  c.motion.ramp_min = 25;
  c.motion.ramp_max = 100;
  const auto start = Clock::now();
  const GradcheckReport r = run_gradcheck(c, 100, 0);
  const double t = seconds_since(start);
  o.detail << "rigid_jacobian " << r.rigid_jacobian_max_error << ", model_vjp " << r.model_vjp_max_error
           << ", chain median " << r.chain_median_error << " over " << r.directions << " directions, " << t << " s";
  o.require(r.rigid_jacobian_max_error < 1e-6, "rigid_jacobian < 1e-6");
  o.require(r.model_vjp_max_error < 1e-6, "model_vjp < 1e-6");
  o.require(r.chain_median_error < 1e-2, "chain median < 1e-2");
  o.require(t < 120.0, "runtime < 2 min");
  return o;
}

double relative_rmse_in_circle(const Image& rec, const Image& truth) {
  const double radius = 0.5 * truth.cols() * truth.pixel_spacing;
  double num = 0.0, den = 0.0;
  for (Eigen::Index i = 0; i < truth.rows(); ++i)
    for (Eigen::Index j = 0; j < truth.cols(); ++j) {
      if (std::hypot(truth.x_of(j), truth.y_of(i)) > radius) continue;
      num += std::pow(rec.values(i, j) - truth.values(i, j), 2);
      den += std::pow(truth.values(i, j), 2);
    }
  return std::sqrt(num / den);
}

Outcome reconstruction_consistency() {
  Outcome o;
  const ScanGeometry g;
  const auto P = make_circular_trajectory(g);
  const Image phantom = make_shepp_logan(512, 1.0);
  const Image rec = reconstruct(forward_project(phantom, P, g), P, {512, 1.0});
  const double rrmse = relative_rmse_in_circle(rec, phantom);

  EllipseSpec e;
  e.semi_axes = Eigen::Vector2d(100, 100);
  const Image disk = rasterize_ellipses({e}, 256, 2.0);
  const Image disk_rec = reconstruct(forward_project(disk, P, g), P, {256, 2.0});
  const double centre = 0.25 * (disk_rec.values(127, 127) + disk_rec.values(127, 128) + disk_rec.values(128, 127) +
                                disk_rec.values(128, 128));
  o.detail << "Shepp-Logan relative RMSE " << rrmse << ", disk centre " << centre << " (truth 1)";
  o.require(rrmse < 0.10, "relative RMSE < 10%");
  o.require(std::abs(centre - 1.0) <= 0.05, "disk centre within 5%");
  return o;
}

// Criteria 3 to 5 share one comparison run.
struct Comparison {
  std::vector<TrialRecord> records;
  int trials_done = 0;
  int trials_planned = 0;
  double seconds = 0.0;
};

Comparison run_desk_comparison() {
  ExperimentConfig c;
  const double budget_s = 60.0 * 60.0;
  const fs::path out = out_root() / "comparison";
  fs::create_directories(out);
  Comparison cmp;
  cmp.trials_planned = c.bench.repetitions;
  const auto start = Clock::now();
  for (int k = 0; k < c.bench.repetitions; ++k) {
    if (seconds_since(start) > budget_s) break;
    ExperimentConfig trial = c;
    trial.phantom.variant = k / c.phantom.trials_per_variant;
    const TrialSetup setup = prepare_trial(trial, c.motion.seed + static_cast<std::uint64_t>(k));
    for (Algorithm a : c.bench.algorithms) {
      AlgorithmRun run = run_algorithm(trial, setup, a);
      progress(run.record);
      write_trace_csv(out / ("trace_" + to_string(a) + "_" + std::to_string(setup.seed) + ".csv"), run.result.trace);
      cmp.records.push_back(run.record);
    }
    ++cmp.trials_done;
    write_records_csv(out / "results.csv", cmp.records);
  }
  cmp.seconds = seconds_since(start);
  return cmp;
}

std::vector<TrialRecord> of(const std::vector<TrialRecord>& records, Algorithm a) {
  std::vector<TrialRecord> out;
  for (const auto& r : records)
    if (r.algorithm == a) out.push_back(r);
  return out;
}

Outcome end_to_end(const Comparison& cmp) {
  Outcome o;
  o.detail << cmp.trials_done << "/" << cmp.trials_planned << " trials in " << cmp.seconds / 60.0 << " min;";
  o.require(cmp.trials_done == cmp.trials_planned, "all trials within the 60 min budget");
  o.require(cmp.seconds <= 3600.0, "budget 60 min");
  for (Algorithm a : all_algorithms()) {
    int within_1 = 0, within_02 = 0;
    for (const auto& r : of(cmp.records, a)) {
      within_1 += r.relative_mse <= 0.01;
      within_02 += r.relative_mse <= 0.002;
    }
    o.detail << " " << to_string(a) << " " << within_1 << " <=1%, " << within_02 << " <=0.2%;";
    o.require(within_1 >= 20, to_string(a) + " >= 20 trials at <= 1%");
    if (a == Algorithm::cma_es || a == Algorithm::bfgs)
      o.require(within_02 >= 20, to_string(a) + " >= 20 trials at <= 0.2%");
  }
  return o;
}

double mean_of(const std::vector<TrialRecord>& rs, const std::function<double(const TrialRecord&)>& f) {
  std::vector<double> v;
  for (const auto& r : rs) v.push_back(f(r));
  return mean_std(v).mean;
}

Outcome evaluation_counts(const Comparison& cmp) {
  Outcome o;
  o.require(cmp.trials_done > 0, "at least one comparison trial");
  for (const auto& r : cmp.records) {
    if (uses_gradient(r.algorithm))
      o.require(r.njev == r.nfev, to_string(r.algorithm) + " njev == nfev");
    else
      o.require(r.njev == 0, to_string(r.algorithm) + " njev == 0");
  }
  const double cma = mean_of(of(cmp.records, Algorithm::cma_es), [](const TrialRecord& r) { return double(r.nfev); });
  const double bfgs = mean_of(of(cmp.records, Algorithm::bfgs), [](const TrialRecord& r) { return double(r.nfev); });
  o.detail << "over " << cmp.trials_done << " trials: mean nfev cma_es " << cma << ", bfgs " << bfgs << " (ratio "
           << (bfgs > 0 ? cma / bfgs : 0.0) << ")";
  o.require(cma >= 10.0 * bfgs, "nfev(cma_es) >= 10 nfev(bfgs)");
  o.require(bfgs < 200.0, "nfev(bfgs) < 200");
  return o;
}

Outcome relative_speed(const Comparison& cmp) {
  Outcome o;
  o.require(cmp.trials_done > 0, "at least one comparison trial");
  const double cma = mean_of(of(cmp.records, Algorithm::cma_es), [](const TrialRecord& r) { return r.wall_time_s; });
  const double bfgs = mean_of(of(cmp.records, Algorithm::bfgs), [](const TrialRecord& r) { return r.wall_time_s; });
  o.detail << "over " << cmp.trials_done << " trials: mean wall time cma_es " << cma << " s, bfgs " << bfgs
           << " s (ratio " << (bfgs > 0 ? cma / bfgs : 0.0) << ")";
  o.require(bfgs <= cma / 5.0, "time(bfgs) <= time(cma_es) / 5");
  return o;
}

// Sweeps use a 128 px grid (512 mm field of view) to keep the run length manageable.
ExperimentConfig sweep_config(const std::string& name) {
  ExperimentConfig c;
  c.phantom.size = 128;
  c.bench.output_dir = out_root() / name;
  return c;
}

bool succeeded(const std::vector<TrialRecord>& rs, Algorithm a, const std::function<bool(const TrialRecord&)>& cell) {
  for (const auto& r : rs)
    if (r.algorithm == a && cell(r)) return r.success;
  return false;
}

Outcome capture_range() {
  Outcome o;
  const ExperimentConfig c = sweep_config("capture_range");
  const auto rs = capture_range_sweep(c, {2.0, 4.0}, all_algorithms(), progress);
  for (double factor : {2.0, 4.0}) {
    o.detail << " factor " << factor << ":";
    for (Algorithm a : all_algorithms()) {
      const bool ok = succeeded(rs, a, [factor](const TrialRecord& r) { return r.amplitude_factor == factor; });
      o.detail << " " << to_string(a) << (ok ? " ok" : " failed");
      if (factor == 2.0 || a == Algorithm::cma_es || a == Algorithm::bfgs)
        o.require(ok, to_string(a) + " at factor " + std::to_string(static_cast<int>(factor)));
    }
    o.detail << ";";
  }
  return o;
}

Outcome free_parameters() {
  Outcome o;
  const ExperimentConfig c = sweep_config("free_parameters");
  const auto rs = free_param_sweep(c, {40, 80}, all_algorithms(), progress);
  for (int nodes : {40, 80}) {
    o.detail << " N_f " << 3 * nodes << ":";
    for (Algorithm a : all_algorithms()) {
      const bool ok = succeeded(rs, a, [nodes](const TrialRecord& r) { return r.num_nodes == nodes; });
      o.detail << " " << to_string(a) << (ok ? " ok" : " failed");
      if (nodes == 40 || a == Algorithm::cma_es || a == Algorithm::gradient_descent)
        o.require(ok, to_string(a) + " at N_f " + std::to_string(3 * nodes));
    }
    o.detail << ";";
  }
  return o;
}

// ---------------------------------------------------------------------------

struct Counter {
  long values = 0, grads = 0;
};

Outcome optimizer_suite() {
  Outcome o;
  Counter n;
  const auto rosen = [](const Eigen::VectorXd& x) {
    return 100.0 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1.0 - x[0], 2);
  };
  const ValueFn rosen_f = [&](const Eigen::VectorXd& x) {
    ++n.values;
    return rosen(x);
  };
  const GradFn rosen_g = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    ++n.grads;
    g = Eigen::Vector2d(-400.0 * x[0] * (x[1] - x[0] * x[0]) - 2.0 * (1.0 - x[0]), 200.0 * (x[1] - x[0] * x[0]));
    return rosen(x);
  };
  const auto counts_exact = [&](const OptimizerResult& r, Algorithm a) {
    const bool grad = uses_gradient(a);
    return r.nfev == (grad ? n.grads : n.values) && r.njev == (grad ? n.grads : 0) && (grad ? n.values == 0 : n.grads == 0) &&
           static_cast<long>(r.trace.size()) == r.nfev;
  };

  OptimizerConfig b;
  b.algorithm = Algorithm::bfgs;
  b.grad_norm_tol = 1e-10;
  const auto rb = minimize(rosen_f, rosen_g, Eigen::Vector2d(-1.2, 1.0), b);
  const double bfgs_err = (rb.g_star - Eigen::Vector2d(1.0, 1.0)).cwiseAbs().maxCoeff();
  o.require(bfgs_err < 1e-6, "BFGS Rosenbrock to 1e-6");
  o.require(counts_exact(rb, Algorithm::bfgs), "BFGS counts");

  n = {};
  OptimizerConfig cm;
  cm.algorithm = Algorithm::cma_es;
  cm.f_tol = 1e-16;
  cm.rng_seed = 1;
  const ValueFn sphere = [&](const Eigen::VectorXd& x) {
    ++n.values;
    return x.squaredNorm();
  };
  const auto rc = minimize(sphere, {}, Eigen::VectorXd::Ones(30), cm);
  o.require(rc.g_star.norm() < 1e-5, "CMA-ES 30-d sphere to 1e-5");
  o.require(counts_exact(rc, Algorithm::cma_es), "CMA-ES counts");

  n = {};
  OptimizerConfig nm;
  nm.algorithm = Algorithm::nelder_mead;
  nm.f_tol = 1e-10;
  const ValueFn quad = [&](const Eigen::VectorXd& z) {
    ++n.values;
    return std::pow(z[0] - 3.0, 2) + std::pow(z[1] + 1.0, 2);
  };
  const auto rn = minimize(quad, {}, Eigen::Vector2d::Zero(), nm);
  const double nm_err = (rn.g_star - Eigen::Vector2d(3.0, -1.0)).cwiseAbs().maxCoeff();
  o.require(nm_err < 1e-3, "Nelder-Mead quadratic to 1e-3");
  o.require(counts_exact(rn, Algorithm::nelder_mead), "Nelder-Mead counts");

  n = {};
  OptimizerConfig gd;
  gd.algorithm = Algorithm::gradient_descent;
  gd.gd_step = 0.4;
  gd.grad_norm_tol = 1e-4;
  const GradFn sq = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    ++n.grads;
    g = 2.0 * x;
    return x.squaredNorm();
  };
  const auto rg = minimize({}, sq, Eigen::VectorXd::Ones(5), gd);
  bool monotone = true;
  for (std::size_t i = 1; i < rg.trace.size(); ++i) monotone = monotone && rg.trace[i].value < rg.trace[i - 1].value;
  o.require(monotone, "gradient descent monotone");
  o.require(counts_exact(rg, Algorithm::gradient_descent), "gradient descent counts");

  o.detail << "BFGS error " << bfgs_err << ", CMA-ES |g| " << rc.g_star.norm() << " after " << rc.nfev
           << " evaluations, Nelder-Mead error " << nm_err << ", gradient descent " << rg.nfev
           << " monotone steps";
  return o;
}

Outcome determinism() {
  Outcome o;
  ExperimentConfig c;
  c.phantom.size = 64;
  c.geometry.num_projections = 120;
  c.motion.ramp_min = 20;
  c.motion.ramp_max = 60;

  const TrialSetup a = prepare_trial(c, 7);
  const TrialSetup b = prepare_trial(c, 7);
  o.require(a.scan.sinogram.values == b.scan.sinogram.values, "simulate repeatable");
  o.require(a.scan.perturbed == b.scan.perturbed, "motion repeatable");

  const Eigen::VectorXd g = Eigen::VectorXd::LinSpaced(30, -0.5, 0.5);
  std::vector<Grid> sinos, images;
  std::vector<ValueAndGradient> grads;
  for (int threads : {1, 3, 8}) {
    set_num_threads(threads);
    sinos.push_back(forward_project(a.phantom, a.scan.nominal, c.geometry).values);
    images.push_back(reconstruct(a.scan.sinogram, a.scan.perturbed, c.phantom.grid()).values);
    grads.push_back(objective_grad(a.problem, g));
  }
  set_num_threads(0);
  for (std::size_t i = 1; i < sinos.size(); ++i) {
    o.require(sinos[i] == sinos[0], "projector across thread counts");
    o.require(images[i] == images[0], "reconstruction across thread counts");
    o.require(grads[i].value == grads[0].value && grads[i].gradient == grads[0].gradient,
              "objective gradient across thread counts");
  }

  for (Algorithm alg : {Algorithm::cma_es, Algorithm::bfgs}) {
    ExperimentConfig cc = c;
    OptimizerConfig oc = default_optimizer(alg);
    oc.max_fev = 300;
    oc.max_iter = 10;
    oc.rng_seed = 99;
    cc.optimizers[alg] = oc;
    const AlgorithmRun x = run_algorithm(cc, a, alg);
    const AlgorithmRun y = run_algorithm(cc, a, alg);
    o.require(x.result.g_star == y.result.g_star && same_outcome(x.record, y.record), to_string(alg) + " repeatable");
  }
  o.detail << "simulation, projector, reconstruction, objective gradient (1/3/8 threads), CMA-ES and BFGS runs";
  return o;
}

}  // namespace

int main() {
  const std::set<int> ids = selected();
  const char* names[] = {"",
                         "gradient fidelity",
                         "reconstruction self-consistency",
                         "end-to-end compensation",
                         "evaluation-count structure",
                         "relative speed",
                         "capture range",
                         "free-parameter robustness",
                         "optimizer unit suite",
                         "determinism"};
  fs::create_directories(out_root());
  std::cout << "threads: " << num_threads() << "\n" << std::flush;

  bool all = true;
  const auto report = [&](int id, const Outcome& o) {
    all = all && o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << id << " (" << names[id] << "): " << o.detail.str()
              << "\n"
              << std::flush;
  };
  const auto run = [&](int id, const std::function<Outcome()>& f) {
    if (!ids.count(id)) return;
    const auto start = Clock::now();
    Outcome o = f();
    o.detail << " [" << seconds_since(start) << " s]";
    report(id, o);
  };

  run(1, gradient_fidelity);
  run(2, reconstruction_consistency);
  run(8, optimizer_suite);
  run(9, determinism);
  if (ids.count(3) || ids.count(4) || ids.count(5)) {
    const Comparison cmp = run_desk_comparison();
    run(3, [&] { return end_to_end(cmp); });
    run(4, [&] { return evaluation_counts(cmp); });
    run(5, [&] { return relative_speed(cmp); });
  }
  run(6, capture_range);
  run(7, free_parameters);
  return all ? 0 : 1;
}
