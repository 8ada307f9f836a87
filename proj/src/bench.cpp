#include "geomopt/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <random>
#include <thread>

#include "geomopt/csv.hpp"
#include "geomopt/error.hpp"
#include "geomopt/grid_io.hpp"
#include "geomopt/phantom.hpp"

namespace geomopt {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

GridSpec grid_of(const Image& image) {
  if (image.rows() != image.cols()) throw ShapeError("reconstruction grids must be square");
  return {static_cast<int>(image.rows()), image.pixel_spacing};
}

std::string factor_label(double f) {
  std::string s = format_double(f);
  std::replace(s.begin(), s.end(), '.', 'p');
  return s;
}

// Runs body(i) for i in [0, n) on up to `jobs` workers, each index once.
void run_pool(std::size_t n, int jobs, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
}

struct Cell {
  ExperimentConfig config;
  std::uint64_t seed;
  fs::path trace_dir;
};

// Prepares each cell's problem once and runs every algorithm on it.
std::vector<TrialRecord> run_cells(const std::vector<Cell>& cells, const std::vector<Algorithm>& algorithms, int jobs,
                                   const ProgressFn& progress) {
  std::vector<TrialRecord> records(cells.size() * algorithms.size());
  std::mutex progress_mutex;
  run_pool(cells.size(), jobs, [&](std::size_t c) {
    const Cell& cell = cells[c];
    const TrialSetup setup = prepare_trial(cell.config, cell.seed);
    for (std::size_t a = 0; a < algorithms.size(); ++a) {
      AlgorithmRun run = run_algorithm(cell.config, setup, algorithms[a]);
      if (cell.config.bench.write_traces && !cell.trace_dir.empty()) {
        fs::create_directories(cell.trace_dir);
        write_trace_csv(cell.trace_dir / ("trace_" + to_string(algorithms[a]) + "_" + std::to_string(cell.seed) + ".csv"),
                        run.result.trace);
      }
      records[c * algorithms.size() + a] = run.record;
      if (progress) {
        std::lock_guard lock(progress_mutex);
        progress(run.record);
      }
    }
  });
  return records;
}

}  // namespace

bool same_outcome(const TrialRecord& a, const TrialRecord& b) {
  return a.algorithm == b.algorithm && a.seed == b.seed && a.phantom_id == b.phantom_id &&
         a.amplitude_factor == b.amplitude_factor && a.num_nodes == b.num_nodes && a.initial_mse == b.initial_mse &&
         a.final_mse == b.final_mse && a.relative_mse == b.relative_mse && a.success == b.success &&
         a.nfev == b.nfev && a.njev == b.njev && a.termination == b.termination;
}

Image make_phantom(const ExperimentConfig& config) {
  if (config.phantom.kind == "image") return load_image(config.phantom.image_path);
  const GridSpec grid = config.phantom.grid();
  return make_phantom_variant(config.phantom.variant, grid.size, grid.spacing);
}

RigidParams make_motion(const ExperimentConfig& config, std::uint64_t seed) {
  const int n = config.geometry.num_projections;
  StepMotionPattern pattern;
  if (config.motion.fixed_pattern) {
    pattern = *config.motion.fixed_pattern;
  } else {
    std::mt19937_64 rng(seed);
    pattern = random_step_pattern(n, config.motion.amplitudes, rng, config.motion.ramp_min, config.motion.ramp_max);
  }
  pattern.amplitudes = pattern.amplitudes.scaled(config.bench.amplitude_factor);
  return make_step_pattern(n, pattern);
}

TrialSetup prepare_trial(const ExperimentConfig& config, std::uint64_t seed) {
  config.validate();
  Image phantom = make_phantom(config);
  RigidParams motion = make_motion(config, seed);
  CorruptedScan scan = simulate_corrupted_scan(phantom, config.geometry, motion);
  const SplineMotionModel model(config.model.num_nodes, config.geometry.num_projections);
  CompensationProblem problem =
      make_problem(scan.sinogram, scan.perturbed, scan.nominal, model, grid_of(phantom), config.model.fov_mask);
  const double initial_mse = objective_value(problem, Eigen::VectorXd::Zero(model.num_parameters()));
  return TrialSetup{seed,
                    config.phantom.variant,
                    config.bench.amplitude_factor,
                    std::move(phantom),
                    std::move(motion),
                    std::move(scan),
                    std::move(problem),
                    initial_mse};
}

bool is_success(const BenchConfig& bench, double initial_mse, double final_mse) {
  const double threshold =
      bench.threshold_mode == ThresholdMode::relative ? bench.success_threshold * initial_mse : bench.success_threshold;
  return final_mse <= threshold;
}

AlgorithmRun run_algorithm(const ExperimentConfig& config, const TrialSetup& setup, Algorithm algorithm) {
  const CompensationProblem& problem = setup.problem;
  const int num_nodes = problem.model.num_nodes();
  const double norm = config.bench.normalize_objective && setup.initial_mse > 0.0 ? setup.initial_mse : 1.0;

  const ValueFn f = [&](const Eigen::VectorXd& g) { return objective_value(problem, g) / norm; };
  const GradFn fg = [&](const Eigen::VectorXd& g, Eigen::VectorXd& grad) {
    ValueAndGradient vg = objective_grad(problem, g);
    grad = vg.gradient / norm;
    return vg.value / norm;
  };

  AlgorithmRun run;
  run.result = minimize(f, fg, Eigen::VectorXd::Zero(3 * num_nodes), config.optimizer(algorithm, num_nodes));
  run.result.f_star *= norm;
  for (auto& t : run.result.trace) t.value *= norm;

  TrialRecord& r = run.record;
  r.algorithm = algorithm;
  r.seed = setup.seed;
  r.phantom_id = setup.phantom_id;
  r.amplitude_factor = setup.amplitude_factor;
  r.num_nodes = num_nodes;
  r.initial_mse = setup.initial_mse;
  r.final_mse = run.result.f_star;
  r.relative_mse = setup.initial_mse > 0.0 ? r.final_mse / setup.initial_mse : 0.0;
  r.success = is_success(config.bench, r.initial_mse, r.final_mse);
  r.nfev = run.result.nfev;
  r.njev = run.result.njev;
  r.wall_time_s = run.result.wall_time_s;
  r.termination = run.result.termination;
  return run;
}

TrialRecord run_trial(const ExperimentConfig& config, Algorithm algorithm, std::uint64_t seed) {
  return run_algorithm(config, prepare_trial(config, seed), algorithm).record;
}

Stat mean_std(const std::vector<double>& values) {
  if (values.empty()) return {};
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  return {mean, std::sqrt(sq / static_cast<double>(values.size()))};
}

std::vector<AlgorithmSummary> summarize(const std::vector<TrialRecord>& records) {
  std::vector<AlgorithmSummary> out;
  for (Algorithm a : all_algorithms()) {
    std::vector<double> nfev, njev, initial, final, relative, time;
    AlgorithmSummary s;
    s.algorithm = a;
    for (const auto& r : records) {
      if (r.algorithm != a) continue;
      ++s.trials;
      if (r.success) ++s.successes;
      nfev.push_back(static_cast<double>(r.nfev));
      njev.push_back(static_cast<double>(r.njev));
      initial.push_back(r.initial_mse);
      final.push_back(r.final_mse);
      relative.push_back(r.relative_mse);
      time.push_back(r.wall_time_s);
    }
    if (s.trials == 0) continue;
    s.nfev = mean_std(nfev);
    s.njev = mean_std(njev);
    s.initial_mse = mean_std(initial);
    s.final_mse = mean_std(final);
    s.relative_mse = mean_std(relative);
    s.wall_time_s = mean_std(time);
    out.push_back(s);
  }
  return out;
}

json to_json(const std::vector<AlgorithmSummary>& summary) {
  const auto stat = [](const Stat& s) { return json{{"mean", s.mean}, {"std", s.std}}; };
  json list = json::array();
  for (const auto& s : summary) {
    list.push_back({{"algorithm", to_string(s.algorithm)},
                    {"trials", s.trials},
                    {"successes", s.successes},
                    {"nfev", stat(s.nfev)},
                    {"njev", stat(s.njev)},
                    {"initial_mse", stat(s.initial_mse)},
                    {"final_mse", stat(s.final_mse)},
                    {"relative_mse", stat(s.relative_mse)},
                    {"wall_time_s", stat(s.wall_time_s)}});
  }
  return {{"algorithms", list}};
}

void write_records_csv(const fs::path& path, const std::vector<TrialRecord>& records) {
  CsvTable table;
  table.header = {"algorithm", "seed",         "phantom_id", "amplitude_factor", "num_nodes",
                  "initial_mse", "final_mse",  "relative_mse", "success",        "nfev",
                  "njev",      "wall_time_s", "termination"};
  for (const auto& r : records) {
    table.rows.push_back({to_string(r.algorithm), std::to_string(r.seed), std::to_string(r.phantom_id),
                          format_double(r.amplitude_factor), std::to_string(r.num_nodes),
                          format_double(r.initial_mse), format_double(r.final_mse), format_double(r.relative_mse),
                          r.success ? "true" : "false", std::to_string(r.nfev), std::to_string(r.njev),
                          format_double(r.wall_time_s), to_string(r.termination)});
  }
  write_csv(path, table);
}

std::vector<TrialRecord> read_records_csv(const fs::path& path) {
  const CsvTable table = read_csv(path);
  std::vector<std::size_t> col;
  for (const char* name : {"algorithm", "seed", "phantom_id", "amplitude_factor", "num_nodes", "initial_mse",
                           "final_mse", "relative_mse", "success", "nfev", "njev", "wall_time_s", "termination"})
    col.push_back(table.column(name));
  std::vector<TrialRecord> out;
  for (const auto& row : table.rows) {
    try {
      TrialRecord r;
      r.algorithm = parse_algorithm(row[col[0]]);
      r.seed = std::stoull(row[col[1]]);
      r.phantom_id = std::stoi(row[col[2]]);
      r.amplitude_factor = std::stod(row[col[3]]);
      r.num_nodes = std::stoi(row[col[4]]);
      r.initial_mse = std::stod(row[col[5]]);
      r.final_mse = std::stod(row[col[6]]);
      r.relative_mse = std::stod(row[col[7]]);
      r.success = row[col[8]] == "true";
      r.nfev = std::stol(row[col[9]]);
      r.njev = std::stol(row[col[10]]);
      r.wall_time_s = std::stod(row[col[11]]);
      r.termination = parse_termination(row[col[12]]);
      out.push_back(r);
    } catch (const std::logic_error& e) {
      throw MalformedHeaderError(path.string() + ": bad record field (" + e.what() + ")");
    }
  }
  return out;
}

std::vector<TrialRecord> run_comparison(const ExperimentConfig& config, const ProgressFn& progress) {
  config.validate();
  const fs::path out = config.bench.output_dir;
  fs::create_directories(out);
  std::vector<Cell> cells;
  for (int k = 0; k < config.bench.repetitions; ++k) {
    Cell cell{config, config.motion.seed + static_cast<std::uint64_t>(k), out};
    cell.config.phantom.variant = config.phantom.variant + k / config.phantom.trials_per_variant;
    cells.push_back(std::move(cell));
  }
  std::vector<TrialRecord> records = run_cells(cells, config.bench.algorithms, config.bench.jobs, progress);
  write_records_csv(out / "results.csv", records);
  std::ofstream(out / "summary.json") << to_json(summarize(records)).dump(2) << "\n";
  return records;
}

std::vector<TrialRecord> capture_range_sweep(const ExperimentConfig& config, const std::vector<double>& factors,
                                             const std::vector<Algorithm>& algorithms, const ProgressFn& progress) {
  config.validate();
  const fs::path out = config.bench.output_dir;
  fs::create_directories(out);
  std::vector<Cell> cells;
  for (double factor : factors) {
    if (!(factor > 0.0)) throw ConfigError("amplitude factors must be positive");
    Cell cell{config, config.motion.seed, out / "capture_range" / ("factor_" + factor_label(factor))};
    cell.config.bench.amplitude_factor = factor;
    cells.push_back(std::move(cell));
  }
  std::vector<TrialRecord> records = run_cells(cells, algorithms, config.bench.jobs, progress);
  write_records_csv(out / "capture_range.csv", records);
  return records;
}

std::vector<TrialRecord> free_param_sweep(const ExperimentConfig& config, const std::vector<int>& node_counts,
                                          const std::vector<Algorithm>& algorithms, const ProgressFn& progress) {
  config.validate();
  const fs::path out = config.bench.output_dir;
  fs::create_directories(out);
  std::vector<Cell> cells;
  for (int nodes : node_counts) {
    if (nodes < 2) throw ConfigError("node counts must be >= 2");
    Cell cell{config, config.motion.seed, out / "free_parameters" / ("nodes_" + std::to_string(nodes))};
    cell.config.model.num_nodes = nodes;
    cells.push_back(std::move(cell));
  }
  std::vector<TrialRecord> records = run_cells(cells, algorithms, config.bench.jobs, progress);
  write_records_csv(out / "free_parameters.csv", records);
  return records;
}

GradcheckReport run_gradcheck(const ExperimentConfig& config, int directions, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  GradcheckReport report;
  report.directions = directions;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto max_abs = [](const auto& m) { return m.cwiseAbs().maxCoeff(); };

  // rigid_jacobian against central differences of P * T(r, tx, ty).
  const ProjectionMatrixStack nominal = make_circular_trajectory(config.geometry);
  for (int trial = 0; trial < 10; ++trial) {
    const ProjectionMatrix& P = nominal[static_cast<std::size_t>(trial * 37) % nominal.size()];
    const double r = 0.1 * normal(rng), tx = 10.0 * normal(rng), ty = 10.0 * normal(rng);
    const auto J = rigid_jacobian(P, r, tx, ty);
    const double h[3] = {1e-6, 1e-4, 1e-4};
    for (int k = 0; k < 3; ++k) {
      double plus[3] = {r, tx, ty}, minus[3] = {r, tx, ty};
      plus[k] += h[k];
      minus[k] -= h[k];
      const ProjectionMatrix fd = (P * rigid_transform(plus[0], plus[1], plus[2]) -
                                   P * rigid_transform(minus[0], minus[1], minus[2])) /
                                  (2.0 * h[k]);
      const double err = max_abs(ProjectionMatrix(J[static_cast<std::size_t>(k)] - fd)) /
                         std::max(1.0, max_abs(J[static_cast<std::size_t>(k)]));
      report.rigid_jacobian_max_error = std::max(report.rigid_jacobian_max_error, err);
    }
  }

  // Model VJP against central differences of <G, m(g, P)>.
  const int num_nodes = config.model.num_nodes;
  const SplineMotionModel model(num_nodes, config.geometry.num_projections);
  const Eigen::VectorXd scale = parameter_scale(num_nodes, config.model.rotation_scale, config.model.translation_scale);
  Eigen::VectorXd g(model.num_parameters());
  for (Eigen::Index i = 0; i < g.size(); ++i) g[i] = 0.2 * scale[i] * normal(rng);
  GeometryGradient cot = GeometryGradient::zeros(nominal.size());
  for (auto& G : cot.values)
    for (int e = 0; e < 6; ++e) G(e / 3, e % 3) = normal(rng);
  const auto pairing = [&](const Eigen::VectorXd& params) {
    const ProjectionMatrixStack P = model.apply(params, nominal);
    double s = 0.0;
    for (std::size_t p = 0; p < P.size(); ++p) s += (cot.values[p].array() * P[p].array()).sum();
    return s;
  };
  const Eigen::VectorXd vjp = model.vjp(g, nominal, cot);
  Eigen::VectorXd fd(g.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const double h = i < num_nodes ? 1e-6 : 1e-4;
    Eigen::VectorXd gp = g, gm = g;
    gp[i] += h;
    gm[i] -= h;
    fd[i] = (pairing(gp) - pairing(gm)) / (2.0 * h);
  }
  report.model_vjp_max_error = max_abs(Eigen::VectorXd(vjp - fd)) / std::max(1.0, max_abs(vjp));
  report.stages_pass = report.rigid_jacobian_max_error < 1e-6 && report.model_vjp_max_error < 1e-6;

  // Full chain: directional derivatives along random directions.
  const TrialSetup setup = prepare_trial(config, config.motion.seed);
  const CompensationProblem& problem = setup.problem;
  const ValueAndGradient at = objective_grad(problem, g);
  Eigen::VectorXd step(g.size());
  for (Eigen::Index i = 0; i < g.size(); ++i) step[i] = i < num_nodes ? 1e-5 : 1e-3;
  std::vector<double> errors;
  for (int d = 0; d < directions; ++d) {
    Eigen::VectorXd v(g.size());
    for (Eigen::Index i = 0; i < g.size(); ++i) v[i] = step[i] * normal(rng);
    const double analytic = at.gradient.dot(v);
    const double numeric = 0.5 * (objective_value(problem, g + v) - objective_value(problem, g - v));
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-300});
    errors.push_back(std::abs(analytic - numeric) / denom);
  }
  if (!errors.empty()) {
    std::vector<double> sorted = errors;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t m = sorted.size();
    report.chain_median_error = m % 2 == 1 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
    report.chain_max_error = sorted.back();
  }
  report.chain_pass = !errors.empty() && report.chain_median_error < 1e-2;
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace geomopt
