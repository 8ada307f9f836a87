#include "geomopt/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "geomopt/bench.hpp"
#include "geomopt/error.hpp"
#include "geomopt/grid_io.hpp"
#include "geomopt/parallel.hpp"

namespace geomopt {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  std::vector<std::string> algorithms;
  int jobs = 0;
  int size = 0;
  std::vector<double> factors;
  std::vector<int> nodes;
  std::string bundle;
  int directions = 100;
  int projections = 0;
};

bool given(CLI::App& sub, const std::string& name) {
  const CLI::Option* opt = sub.get_option_no_throw(name);
  return opt != nullptr && opt->count() > 0;
}

ExperimentConfig resolve_config(const Options& o, CLI::App& sub) {
  ExperimentConfig c = o.config.empty() ? ExperimentConfig{} : load_experiment_config(o.config);
  if (given(sub, "--size")) c.phantom.size = o.size;
  if (given(sub, "--seed")) c.motion.seed = o.seed;
  if (given(sub, "--jobs")) c.bench.jobs = o.jobs;
  if (given(sub, "--out")) c.bench.output_dir = o.out;
  if (given(sub, "--factors")) c.bench.factors = o.factors;
  if (given(sub, "--nodes")) c.bench.node_counts = o.nodes;
  if (given(sub, "--projections")) c.geometry.num_projections = o.projections;
  if (given(sub, "--algorithms")) {
    c.bench.algorithms.clear();
    for (const auto& name : o.algorithms) c.bench.algorithms.push_back(parse_algorithm(name));
  }
  c.validate();
  return c;
}

void save_with_preview(const fs::path& stem, const Image& image) {
  save_image(stem, image);
  const auto [lo, hi] = auto_window(image);
  fs::path pgm = stem;
  pgm += ".pgm";
  export_pgm(image, pgm, lo, hi);
}

void print_record(std::ostream& out, const TrialRecord& r) {
  out << std::left << std::setw(18) << to_string(r.algorithm) << " seed " << r.seed << " phantom " << r.phantom_id
      << " factor " << r.amplitude_factor << " nodes " << r.num_nodes << "  rel_mse " << std::scientific
      << std::setprecision(3) << r.relative_mse << std::defaultfloat << "  nfev " << r.nfev << "  njev " << r.njev
      << "  " << std::fixed << std::setprecision(1) << r.wall_time_s << std::defaultfloat << " s  "
      << to_string(r.termination) << (r.success ? "  ok" : "  FAILED") << "\n"
      << std::flush;
}

void print_summary(std::ostream& out, const std::vector<TrialRecord>& records) {
  for (const auto& s : summarize(records)) {
    out << std::left << std::setw(18) << to_string(s.algorithm) << " success " << s.successes << "/" << s.trials
        << "  nfev " << s.nfev.mean << " +- " << s.nfev.std << "  njev " << s.njev.mean << " +- " << s.njev.std
        << "  rel_mse " << s.relative_mse.mean << " +- " << s.relative_mse.std << "  time " << s.wall_time_s.mean
        << " +- " << s.wall_time_s.std << " s\n";
  }
}

int cmd_phantom(const Options& o, CLI::App& sub, std::ostream& out) {
  const ExperimentConfig c = resolve_config(o, sub);
  const fs::path dir = o.out.empty() ? fs::path(".") : fs::path(o.out);
  fs::create_directories(dir);
  save_with_preview(dir / "phantom", make_phantom(c));
  out << "wrote " << (dir / "phantom").string() << ".{json,bin,pgm}\n";
  return kExitOk;
}

int cmd_simulate(const Options& o, CLI::App& sub, std::ostream& out) {
  const ExperimentConfig c = resolve_config(o, sub);
  const fs::path dir = o.out.empty() ? fs::path(".") : fs::path(o.out);
  fs::create_directories(dir);
  const TrialSetup setup = prepare_trial(c, c.motion.seed);
  save_with_preview(dir / "phantom", setup.phantom);
  save_sinogram(dir / "sinogram", setup.scan.sinogram);
  save_matrices(dir / "nominal_matrices.json", setup.scan.nominal);
  save_matrices(dir / "perturbed_matrices.json", setup.scan.perturbed);
  save_with_preview(dir / "reference", setup.problem.reference);
  save_with_preview(dir / "corrupted", reconstruct_with(setup.problem, Eigen::VectorXd::Zero(3 * c.model.num_nodes)));
  write_motion_csv(dir / "motion_true.csv", setup.motion);
  const json bundle = {{"kind", "corrupted_scan"},
                       {"seed", setup.seed},
                       {"phantom_id", setup.phantom_id},
                       {"amplitude_factor", setup.amplitude_factor},
                       {"initial_mse", setup.initial_mse},
                       {"config", to_json(c)}};
  std::ofstream(dir / "bundle.json") << bundle.dump(2) << "\n";
  out << "initial MSE " << setup.initial_mse << "\nwrote bundle to " << dir.string() << "\n";
  return kExitOk;
}

int cmd_optimize(const Options& o, CLI::App& sub, std::ostream& out) {
  const fs::path dir = o.bundle;
  std::ifstream bundle_in(dir / "bundle.json");
  if (!bundle_in) throw MissingFileError("no bundle.json in " + dir.string());
  json bundle;
  try {
    bundle_in >> bundle;
  } catch (const json::exception& e) {
    throw MalformedHeaderError((dir / "bundle.json").string() + ": " + e.what());
  }
  ExperimentConfig c;
  if (o.config.empty()) {
    c = parse_experiment_config(bundle.at("config"));
    if (given(sub, "--algorithms")) {
      c.bench.algorithms.clear();
      for (const auto& name : o.algorithms) c.bench.algorithms.push_back(parse_algorithm(name));
    }
  } else {
    c = resolve_config(o, sub);
  }
  if (!given(sub, "--algorithms")) c.bench.algorithms = {Algorithm::bfgs};
  if (c.bench.algorithms.size() != 1) throw ConfigError("optimize runs exactly one algorithm");
  const Algorithm algorithm = c.bench.algorithms.front();
  if (given(sub, "--seed")) {
    OptimizerConfig oc = c.optimizer(algorithm, c.model.num_nodes);
    oc.rng_seed = o.seed;
    c.optimizers[algorithm] = oc;
  }

  Image phantom = load_image(dir / "phantom");
  Sinogram sino = load_sinogram(dir / "sinogram");
  ProjectionMatrixStack nominal = load_matrices(dir / "nominal_matrices.json");
  ProjectionMatrixStack perturbed = load_matrices(dir / "perturbed_matrices.json");
  RigidParams motion = read_motion_csv(dir / "motion_true.csv");
  const SplineMotionModel model(c.model.num_nodes, sino.geometry.num_projections);
  const GridSpec grid{static_cast<int>(phantom.rows()), phantom.pixel_spacing};
  CompensationProblem problem = make_problem(sino, perturbed, nominal, model, grid, c.model.fov_mask);
  const double initial = objective_value(problem, Eigen::VectorXd::Zero(model.num_parameters()));
  const TrialSetup setup{bundle.value("seed", std::uint64_t{0}),
                         bundle.value("phantom_id", 0),
                         bundle.value("amplitude_factor", 1.0),
                         std::move(phantom),
                         std::move(motion),
                         CorruptedScan{std::move(sino), std::move(perturbed), std::move(nominal)},
                         std::move(problem),
                         initial};

  const AlgorithmRun run = run_algorithm(c, setup, algorithm);
  const fs::path out_dir = o.out.empty() ? dir / ("optimize_" + to_string(algorithm)) : fs::path(o.out);
  fs::create_directories(out_dir);
  save_with_preview(out_dir / "recovered", reconstruct_with(setup.problem, run.result.g_star));
  write_motion_csv(out_dir / "motion_recovered.csv", setup.problem.model.curves(run.result.g_star));
  write_trace_csv(out_dir / ("trace_" + to_string(algorithm) + "_" + std::to_string(setup.seed) + ".csv"),
                  run.result.trace);
  const TrialRecord& r = run.record;
  const json result = {{"algorithm", to_string(algorithm)},
                       {"initial_mse", r.initial_mse},
                       {"final_mse", r.final_mse},
                       {"relative_mse", r.relative_mse},
                       {"success", r.success},
                       {"nfev", r.nfev},
                       {"njev", r.njev},
                       {"iterations", run.result.iterations},
                       {"wall_time_s", r.wall_time_s},
                       {"termination", to_string(r.termination)},
                       {"g_star", std::vector<double>(run.result.g_star.data(),
                                                      run.result.g_star.data() + run.result.g_star.size())}};
  std::ofstream(out_dir / "result.json") << result.dump(2) << "\n";
  print_record(out, r);
  return kExitOk;
}

int cmd_bench(const Options& o, CLI::App& sub, std::ostream& out) {
  const ExperimentConfig c = resolve_config(o, sub);
  const auto progress = [&](const TrialRecord& r) { print_record(out, r); };
  const bool capture = given(sub, "--factors");
  const bool nodes = given(sub, "--nodes");
  if (!capture && !nodes) {
    const auto records = run_comparison(c, progress);
    print_summary(out, records);
  }
  if (capture) capture_range_sweep(c, c.bench.factors, c.bench.algorithms, progress);
  if (nodes) free_param_sweep(c, c.bench.node_counts, c.bench.algorithms, progress);
  out << "results in " << c.bench.output_dir.string() << "\n";
  return kExitOk;
}

int cmd_gradcheck(const Options& o, CLI::App& sub, std::ostream& out) {
  ExperimentConfig c = o.config.empty() ? ExperimentConfig{} : load_experiment_config(o.config);
  if (o.config.empty()) c.phantom.size = 128;
  if (given(sub, "--size")) c.phantom.size = o.size;
  if (given(sub, "--seed")) c.motion.seed = o.seed;
  if (given(sub, "--projections")) {
    c.geometry.num_projections = o.projections;
    c.motion.ramp_max = std::min(c.motion.ramp_max, o.projections - 1);
    c.motion.ramp_min = std::min(c.motion.ramp_min, c.motion.ramp_max);
  }
  c.validate();
  const GradcheckReport r = run_gradcheck(c, o.directions, c.motion.seed);
  out << "rigid_jacobian max rel error " << r.rigid_jacobian_max_error << "\n"
      << "model_vjp max rel error      " << r.model_vjp_max_error << "\n"
      << "stages                       " << (r.stages_pass ? "pass" : "FAIL") << "\n"
      << "chain median rel error       " << r.chain_median_error << " over " << r.directions << " directions (max "
      << r.chain_max_error << ")\n"
      << "chain                        " << (r.chain_pass ? "pass" : "FAIL") << "\n"
      << "time                         " << r.seconds << " s\n";
  return r.pass() ? kExitOk : kExitFailed;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fan-beam CT geometry optimisation toolkit"};
  app.require_subcommand(1);
  Options o;

  const auto add_config = [&](CLI::App* s) { s->add_option("--config", o.config, "experiment config (JSON)"); };
  const auto add_out = [&](CLI::App* s) { s->add_option("--out", o.out, "output directory"); };
  const auto add_seed = [&](CLI::App* s) { s->add_option("--seed", o.seed, "motion / optimizer seed"); };
  const auto add_size = [&](CLI::App* s) {
    s->add_option("--size", o.size, "grid size")->check(CLI::Range(16, 8192));
  };
  const auto add_algorithms = [&](CLI::App* s) {
    s->add_option("--algorithms", o.algorithms, "comma-separated algorithm list")->delimiter(',');
  };

  CLI::App* phantom = app.add_subcommand("phantom", "write a phantom grid and PGM preview");
  add_config(phantom);
  add_out(phantom);
  add_size(phantom);

  CLI::App* simulate = app.add_subcommand("simulate", "write a corrupted-scan bundle");
  add_config(simulate);
  add_out(simulate);
  add_seed(simulate);
  add_size(simulate);

  CLI::App* optimize = app.add_subcommand("optimize", "run one optimizer on a bundle");
  optimize->add_option("bundle", o.bundle, "bundle directory written by simulate")->required();
  add_config(optimize);
  add_out(optimize);
  add_seed(optimize);
  add_algorithms(optimize);

  CLI::App* bench = app.add_subcommand("bench", "comparison (default) or sweeps (--factors, --nodes)");
  add_config(bench);
  add_out(bench);
  add_seed(bench);
  add_size(bench);
  add_algorithms(bench);
  bench->add_option("--jobs", o.jobs, "concurrent trials")->check(CLI::PositiveNumber);
  bench->add_option("--factors", o.factors, "amplitude factors for the capture-range sweep")->delimiter(',');
  bench->add_option("--nodes", o.nodes, "node counts for the free-parameter sweep")->delimiter(',');

  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient checks");
  add_config(gradcheck);
  add_seed(gradcheck);
  add_size(gradcheck);
  gradcheck->add_option("--directions", o.directions, "random directions")->check(CLI::PositiveNumber);
  gradcheck->add_option("--projections", o.projections, "override number of projections")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*phantom) return cmd_phantom(o, *phantom, out);
    if (*simulate) return cmd_simulate(o, *simulate, out);
    if (*optimize) return cmd_optimize(o, *optimize, out);
    if (*bench) return cmd_bench(o, *bench, out);
    if (*gradcheck) return cmd_gradcheck(o, *gradcheck, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    err << "input error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailed;
  }
  return kExitUsage;
}

}  // namespace geomopt
