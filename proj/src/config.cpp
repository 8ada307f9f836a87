#include <fstream>
#include <set>

#include "geomopt/bench.hpp"
#include "geomopt/error.hpp"
#include "geomopt/grid_io.hpp"

namespace geomopt {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& known, const std::string& section) {
  if (!j.is_object()) throw ConfigError(section + " must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw ConfigError("unknown key '" + key + "' in " + section);
}

template <typename T>
void read(const json& j, const char* key, T& target, const std::string& section) {
  if (!j.contains(key)) return;
  try {
    target = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(section + "." + key + " has the wrong type");
  }
}

PhantomConfig parse_phantom(const json& j) {
  check_keys(j, {"kind", "image_path", "size", "field_of_view_mm", "variant", "trials_per_variant"}, "phantom");
  PhantomConfig p;
  read(j, "kind", p.kind, "phantom");
  std::string path;
  read(j, "image_path", path, "phantom");
  p.image_path = path;
  read(j, "size", p.size, "phantom");
  read(j, "field_of_view_mm", p.field_of_view_mm, "phantom");
  read(j, "variant", p.variant, "phantom");
  read(j, "trials_per_variant", p.trials_per_variant, "phantom");
  return p;
}

MotionAmplitudes parse_amplitudes(const json& j, const std::string& section) {
  check_keys(j, {"rotation_rad", "translation_x_mm", "translation_y_mm"}, section);
  MotionAmplitudes a;
  read(j, "rotation_rad", a.rotation, section);
  read(j, "translation_x_mm", a.translation_x, section);
  read(j, "translation_y_mm", a.translation_y, section);
  return a;
}

json amplitudes_to_json(const MotionAmplitudes& a) {
  return {{"rotation_rad", a.rotation}, {"translation_x_mm", a.translation_x}, {"translation_y_mm", a.translation_y}};
}

MotionConfig parse_motion(const json& j) {
  check_keys(j, {"amplitudes", "ramp_min", "ramp_max", "seed", "pattern"}, "motion");
  MotionConfig m;
  if (j.contains("amplitudes")) m.amplitudes = parse_amplitudes(j["amplitudes"], "motion.amplitudes");
  read(j, "ramp_min", m.ramp_min, "motion");
  read(j, "ramp_max", m.ramp_max, "motion");
  read(j, "seed", m.seed, "motion");
  if (j.contains("pattern") && !j["pattern"].is_null()) {
    const json& pj = j["pattern"];
    check_keys(pj, {"p_start", "p_end", "amplitudes"}, "motion.pattern");
    StepMotionPattern pattern;
    read(pj, "p_start", pattern.p_start, "motion.pattern");
    read(pj, "p_end", pattern.p_end, "motion.pattern");
    pattern.amplitudes = m.amplitudes;
    if (pj.contains("amplitudes")) pattern.amplitudes = parse_amplitudes(pj["amplitudes"], "motion.pattern.amplitudes");
    m.fixed_pattern = pattern;
  }
  return m;
}

ModelConfig parse_model(const json& j) {
  check_keys(j, {"num_nodes", "rotation_scale", "translation_scale", "fov_mask"}, "model");
  ModelConfig m;
  read(j, "num_nodes", m.num_nodes, "model");
  read(j, "rotation_scale", m.rotation_scale, "model");
  read(j, "translation_scale", m.translation_scale, "model");
  read(j, "fov_mask", m.fov_mask, "model");
  return m;
}

OptimizerConfig parse_optimizer(const json& j, Algorithm a) {
  const std::string section = "optimizers." + to_string(a);
  check_keys(j,
             {"f_tol", "f_target", "max_fev", "grad_norm_tol", "max_iter", "gd_step", "gd_decay", "cma_sigma0",
              "cma_lambda", "rng_seed", "wolfe_c1", "wolfe_c2", "max_line_search_evals"},
             section);
  OptimizerConfig c = default_optimizer(a);
  read(j, "f_tol", c.f_tol, section);
  read(j, "f_target", c.f_target, section);
  read(j, "max_fev", c.max_fev, section);
  read(j, "grad_norm_tol", c.grad_norm_tol, section);
  read(j, "max_iter", c.max_iter, section);
  read(j, "gd_step", c.gd_step, section);
  read(j, "gd_decay", c.gd_decay, section);
  read(j, "cma_sigma0", c.cma_sigma0, section);
  read(j, "cma_lambda", c.cma_lambda, section);
  read(j, "rng_seed", c.rng_seed, section);
  read(j, "wolfe_c1", c.wolfe_c1, section);
  read(j, "wolfe_c2", c.wolfe_c2, section);
  read(j, "max_line_search_evals", c.max_line_search_evals, section);
  return c;
}

json optimizer_to_json(const OptimizerConfig& c) {
  json j = {{"f_tol", c.f_tol},
            {"max_fev", c.max_fev},
            {"grad_norm_tol", c.grad_norm_tol},
            {"max_iter", c.max_iter},
            {"gd_step", c.gd_step},
            {"gd_decay", c.gd_decay},
            {"cma_sigma0", c.cma_sigma0},
            {"cma_lambda", c.cma_lambda},
            {"rng_seed", c.rng_seed},
            {"wolfe_c1", c.wolfe_c1},
            {"wolfe_c2", c.wolfe_c2},
            {"max_line_search_evals", c.max_line_search_evals}};
  if (std::isfinite(c.f_target)) j["f_target"] = c.f_target;
  return j;
}

BenchConfig parse_bench(const json& j) {
  check_keys(j,
             {"algorithms", "amplitude_factor", "threshold_mode", "success_threshold", "repetitions", "factors",
              "node_counts", "jobs", "write_traces", "normalize_objective", "output_dir"},
             "bench");
  BenchConfig b;
  if (j.contains("algorithms")) {
    std::vector<std::string> names;
    read(j, "algorithms", names, "bench");
    b.algorithms.clear();
    for (const auto& name : names) b.algorithms.push_back(parse_algorithm(name));
  }
  read(j, "amplitude_factor", b.amplitude_factor, "bench");
  if (j.contains("threshold_mode")) {
    std::string mode;
    read(j, "threshold_mode", mode, "bench");
    if (mode == "relative") {
      b.threshold_mode = ThresholdMode::relative;
    } else if (mode == "absolute") {
      b.threshold_mode = ThresholdMode::absolute;
    } else {
      throw ConfigError("bench.threshold_mode must be 'relative' or 'absolute'");
    }
  }
  read(j, "success_threshold", b.success_threshold, "bench");
  read(j, "repetitions", b.repetitions, "bench");
  read(j, "factors", b.factors, "bench");
  read(j, "node_counts", b.node_counts, "bench");
  read(j, "jobs", b.jobs, "bench");
  read(j, "write_traces", b.write_traces, "bench");
  read(j, "normalize_objective", b.normalize_objective, "bench");
  std::string out;
  read(j, "output_dir", out, "bench");
  if (!out.empty()) b.output_dir = out;
  return b;
}

}  // namespace

OptimizerConfig default_optimizer(Algorithm a) {
  OptimizerConfig c;
  c.algorithm = a;
  c.f_target = 0.0;
  c.f_tol = 4e-5;
  c.grad_norm_tol = 8e-4;
  c.gd_step = 20.0;
  return c;
}

Eigen::VectorXd parameter_scale(int num_nodes, double rotation_scale, double translation_scale) {
  Eigen::VectorXd s(3 * num_nodes);
  s.head(num_nodes).setConstant(rotation_scale);
  s.tail(2 * num_nodes).setConstant(translation_scale);
  return s;
}

void ExperimentConfig::validate() const {
  if (phantom.kind != "shepp_logan" && phantom.kind != "image")
    throw ConfigError("phantom.kind must be 'shepp_logan' or 'image'");
  if (phantom.kind == "image" && phantom.image_path.empty()) throw ConfigError("phantom.image_path is required");
  if (phantom.kind == "shepp_logan" && phantom.size < 16) throw ConfigError("phantom.size must be >= 16");
  if (!(phantom.field_of_view_mm > 0.0)) throw ConfigError("phantom.field_of_view_mm must be positive");
  if (phantom.variant < 0) throw ConfigError("phantom.variant must be >= 0");
  if (phantom.trials_per_variant < 1) throw ConfigError("phantom.trials_per_variant must be >= 1");
  geometry.validate();
  if (motion.ramp_min < 1 || motion.ramp_max < motion.ramp_min || motion.ramp_max >= geometry.num_projections)
    throw ConfigError("motion ramp range must satisfy 1 <= ramp_min <= ramp_max < num_projections");
  if (model.num_nodes < 2) throw ConfigError("model.num_nodes must be >= 2");
  if (!(model.rotation_scale > 0.0) || !(model.translation_scale > 0.0))
    throw ConfigError("model scales must be positive");
  if (!(bench.amplitude_factor > 0.0)) throw ConfigError("bench.amplitude_factor must be positive");
  if (bench.repetitions < 1) throw ConfigError("bench.repetitions must be >= 1");
  if (!(bench.success_threshold >= 0.0)) throw ConfigError("bench.success_threshold must be >= 0");
  if (bench.jobs < 1) throw ConfigError("bench.jobs must be >= 1");
  if (bench.algorithms.empty()) throw ConfigError("bench.algorithms must not be empty");
  for (double f : bench.factors)
    if (!(f > 0.0)) throw ConfigError("bench.factors must be positive");
  for (int n : bench.node_counts)
    if (n < 2) throw ConfigError("bench.node_counts must be >= 2");
  for (Algorithm a : all_algorithms()) optimizer(a, model.num_nodes).validate(3 * model.num_nodes);
}

OptimizerConfig ExperimentConfig::optimizer(Algorithm a, int num_nodes) const {
  const auto it = optimizers.find(a);
  OptimizerConfig c = it == optimizers.end() ? default_optimizer(a) : it->second;
  c.algorithm = a;
  c.scale = parameter_scale(num_nodes, model.rotation_scale, model.translation_scale);
  return c;
}

ExperimentConfig parse_experiment_config(const json& j) {
  check_keys(j, {"phantom", "geometry", "motion", "model", "optimizers", "bench"}, "config");
  ExperimentConfig c;
  if (j.contains("phantom")) c.phantom = parse_phantom(j["phantom"]);
  if (j.contains("geometry")) c.geometry = geometry_from_json(j["geometry"]);
  if (j.contains("motion")) c.motion = parse_motion(j["motion"]);
  if (j.contains("model")) c.model = parse_model(j["model"]);
  if (j.contains("optimizers")) {
    const json& oj = j["optimizers"];
    if (!oj.is_object()) throw ConfigError("optimizers must be a JSON object");
    for (const auto& [name, value] : oj.items()) {
      const Algorithm a = parse_algorithm(name);
      c.optimizers[a] = parse_optimizer(value, a);
    }
  }
  if (j.contains("bench")) c.bench = parse_bench(j["bench"]);
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_experiment_config(j);
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["phantom"] = {{"kind", c.phantom.kind},
                  {"image_path", c.phantom.image_path.string()},
                  {"size", c.phantom.size},
                  {"field_of_view_mm", c.phantom.field_of_view_mm},
                  {"variant", c.phantom.variant},
                  {"trials_per_variant", c.phantom.trials_per_variant}};
  j["geometry"] = geometry_to_json(c.geometry);
  j["motion"] = {{"amplitudes", amplitudes_to_json(c.motion.amplitudes)},
                 {"ramp_min", c.motion.ramp_min},
                 {"ramp_max", c.motion.ramp_max},
                 {"seed", c.motion.seed}};
  if (c.motion.fixed_pattern) {
    j["motion"]["pattern"] = {{"p_start", c.motion.fixed_pattern->p_start},
                              {"p_end", c.motion.fixed_pattern->p_end},
                              {"amplitudes", amplitudes_to_json(c.motion.fixed_pattern->amplitudes)}};
  }
  j["model"] = {{"num_nodes", c.model.num_nodes},
                {"rotation_scale", c.model.rotation_scale},
                {"translation_scale", c.model.translation_scale},
                {"fov_mask", c.model.fov_mask}};
  j["optimizers"] = json::object();
  for (Algorithm a : all_algorithms()) j["optimizers"][to_string(a)] = optimizer_to_json(c.optimizer(a, c.model.num_nodes));
  std::vector<std::string> names;
  for (Algorithm a : c.bench.algorithms) names.push_back(to_string(a));
  j["bench"] = {{"algorithms", names},
                {"amplitude_factor", c.bench.amplitude_factor},
                {"threshold_mode", c.bench.threshold_mode == ThresholdMode::relative ? "relative" : "absolute"},
                {"success_threshold", c.bench.success_threshold},
                {"repetitions", c.bench.repetitions},
                {"factors", c.bench.factors},
                {"node_counts", c.bench.node_counts},
                {"jobs", c.bench.jobs},
                {"write_traces", c.bench.write_traces},
                {"normalize_objective", c.bench.normalize_objective},
                {"output_dir", c.bench.output_dir.string()}};
  return j;
}

}  // namespace geomopt
