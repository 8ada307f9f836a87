#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "geomopt/geometry.hpp"
#include "geomopt/image.hpp"
#include "geomopt/motion.hpp"
#include "geomopt/objective.hpp"
#include "geomopt/optim.hpp"

namespace geomopt {

struct PhantomConfig {
  /// "shepp_logan" (with variants) or "image" (loaded from image_path).
  std::string kind = "shepp_logan";
  std::filesystem::path image_path;
  int size = 256;
  double field_of_view_mm = 512.0;
  int variant = 0;
  /// Trials per phantom variant in run_comparison.
  int trials_per_variant = 5;

  GridSpec grid() const { return {size, field_of_view_mm / size}; }
};

struct MotionConfig {
  MotionAmplitudes amplitudes;
  int ramp_min = 50;
  int ramp_max = 200;
  std::uint64_t seed = 1;
  /// When set, every trial uses this pattern instead of a random draw.
  std::optional<StepMotionPattern> fixed_pattern;
};

struct ModelConfig {
  int num_nodes = 10;
  double rotation_scale = 0.05;
  double translation_scale = 5.0;
  bool fov_mask = false;
};

enum class ThresholdMode { relative, absolute };

struct BenchConfig {
  std::vector<Algorithm> algorithms = all_algorithms();
  double amplitude_factor = 1.0;
  ThresholdMode threshold_mode = ThresholdMode::relative;
  /// Fraction of the initial MSE (relative) or an MSE in gray value^2.
  double success_threshold = 0.01;
  int repetitions = 25;
  std::vector<double> factors = {1.0, 2.0, 3.0, 4.0};
  std::vector<int> node_counts = {10, 20, 40, 80};
  int jobs = 1;
  bool write_traces = true;
  /// Optimise f / f(0) so that tolerances and step sizes are independent of
  /// the gray-value scale.
  bool normalize_objective = true;
  std::filesystem::path output_dir = "bench_out";
};

struct ExperimentConfig {
  PhantomConfig phantom;
  ScanGeometry geometry;
  MotionConfig motion;
  ModelConfig model;
  /// Per-algorithm settings; missing entries fall back to default_optimizer().
  std::map<Algorithm, OptimizerConfig> optimizers;
  BenchConfig bench;

  /// Throws ConfigError.
  void validate() const;
  /// Settings for `a` with the scale vector resolved for `num_nodes`.
  OptimizerConfig optimizer(Algorithm a, int num_nodes) const;
};

/// Bench defaults for `a` on the normalised objective.
OptimizerConfig default_optimizer(Algorithm a);

/// Sections {phantom, geometry, motion, model, optimizers, bench}. Missing
/// keys keep their defaults, unknown keys raise ConfigError.
ExperimentConfig parse_experiment_config(const nlohmann::json& j);
/// Throws ConfigError when the file is missing or not valid JSON.
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
nlohmann::json to_json(const ExperimentConfig& config);

/// Per-coordinate scales [rotation nodes, tx nodes, ty nodes].
Eigen::VectorXd parameter_scale(int num_nodes, double rotation_scale, double translation_scale);

struct TrialRecord {
  Algorithm algorithm = Algorithm::bfgs;
  std::uint64_t seed = 0;
  int phantom_id = 0;
  double amplitude_factor = 1.0;
  int num_nodes = 10;
  double initial_mse = 0.0;
  double final_mse = 0.0;
  double relative_mse = 0.0;
  bool success = false;
  long nfev = 0;
  long njev = 0;
  double wall_time_s = 0.0;
  Termination termination = Termination::max_iter;
};

/// Records are equal when everything except wall_time_s matches.
bool same_outcome(const TrialRecord& a, const TrialRecord& b);

/// A simulated corrupted scan and its compensation problem.
struct TrialSetup {
  std::uint64_t seed = 0;
  int phantom_id = 0;
  double amplitude_factor = 1.0;
  Image phantom;
  RigidParams motion;
  CorruptedScan scan;
  CompensationProblem problem;
  double initial_mse = 0.0;
};

Image make_phantom(const ExperimentConfig& config);
/// Motion for `seed`, scaled by bench.amplitude_factor.
RigidParams make_motion(const ExperimentConfig& config, std::uint64_t seed);
TrialSetup prepare_trial(const ExperimentConfig& config, std::uint64_t seed);

struct AlgorithmRun {
  TrialRecord record;
  OptimizerResult result;
};

/// Runs `algorithm` from g0 = 0 on a prepared problem.
AlgorithmRun run_algorithm(const ExperimentConfig& config, const TrialSetup& setup, Algorithm algorithm);
TrialRecord run_trial(const ExperimentConfig& config, Algorithm algorithm, std::uint64_t seed);

bool is_success(const BenchConfig& bench, double initial_mse, double final_mse);

struct Stat {
  double mean = 0.0;
  double std = 0.0;
};
/// Mean and population standard deviation; {0, 0} for an empty list.
Stat mean_std(const std::vector<double>& values);

struct AlgorithmSummary {
  Algorithm algorithm = Algorithm::bfgs;
  int trials = 0;
  int successes = 0;
  Stat nfev, njev, initial_mse, final_mse, relative_mse, wall_time_s;
};

std::vector<AlgorithmSummary> summarize(const std::vector<TrialRecord>& records);
nlohmann::json to_json(const std::vector<AlgorithmSummary>& summary);

void write_records_csv(const std::filesystem::path& path, const std::vector<TrialRecord>& records);
std::vector<TrialRecord> read_records_csv(const std::filesystem::path& path);

/// Called after each finished record; may be empty.
using ProgressFn = std::function<void(const TrialRecord&)>;

/// bench.repetitions trials over all bench.algorithms. Trial k uses phantom
/// variant k / trials_per_variant and motion seed motion.seed + k. Writes
/// results.csv, summary.json and trace_<algo>_<seed>.csv into output_dir.
std::vector<TrialRecord> run_comparison(const ExperimentConfig& config, const ProgressFn& progress = {});

/// One trial (phantom variant and motion seed from config) per factor and
/// algorithm, the motion shape held fixed. Writes capture_range.csv.
std::vector<TrialRecord> capture_range_sweep(const ExperimentConfig& config, const std::vector<double>& factors,
                                             const std::vector<Algorithm>& algorithms,
                                             const ProgressFn& progress = {});

/// One trial per node count and algorithm. Writes free_parameters.csv.
std::vector<TrialRecord> free_param_sweep(const ExperimentConfig& config, const std::vector<int>& node_counts,
                                          const std::vector<Algorithm>& algorithms,
                                          const ProgressFn& progress = {});

struct GradcheckReport {
  double rigid_jacobian_max_error = 0.0;
  double model_vjp_max_error = 0.0;
  double chain_median_error = 0.0;
  double chain_max_error = 0.0;
  int directions = 0;
  double seconds = 0.0;
  bool stages_pass = false;
  bool chain_pass = false;
  bool pass() const { return stages_pass && chain_pass; }
};

/// Finite-difference checks of rigid_jacobian, the motion-model VJP and the
/// full objective gradient (central differences with steps of 1e-5 rad and
/// 1e-3 mm along random directions) on the config's problem.
GradcheckReport run_gradcheck(const ExperimentConfig& config, int directions = 100, std::uint64_t seed = 0);

}  // namespace geomopt
