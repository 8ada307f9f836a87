#include <doctest.h>

#include <fstream>
#include <iterator>
#include <sstream>

#include "geomopt/cli.hpp"
#include "support.hpp"

using namespace geomopt;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "geomopt");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_small_config(const std::filesystem::path& path) {
  std::ofstream(path) << R"({
    "phantom": {"size": 32},
    "geometry": {"num_projections": 40, "num_detector_pixels": 128},
    "motion": {"ramp_min": 5, "ramp_max": 20},
    "bench": {"repetitions": 1, "algorithms": ["bfgs"]},
    "optimizers": {"bfgs": {"max_iter": 3}}
  })";
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(cli({}).code == kExitUsage);
  CHECK(cli({"frobnicate"}).code == kExitUsage);
  CHECK(cli({"phantom", "--bogus"}).code == kExitUsage);
  CHECK(cli({"bench", "--config", "/nonexistent/cfg.json"}).code == kExitUsage);
  CHECK(cli({"phantom", "--size", "4"}).code == kExitUsage);
  CHECK(cli({"optimize", "/nonexistent/bundle"}).code == kExitUsage);

  const auto dir = testing::temp_dir("cli_bad");
  std::ofstream(dir / "c.json") << R"({"phantom": {"colour": 1}})";
  const Run r = cli({"phantom", "--config", (dir / "c.json").string(), "--out", dir.string()});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("colour") != std::string::npos);
}

TEST_CASE("help exits with 0") {
  const Run r = cli({"--help"});
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("gradcheck") != std::string::npos);
}

TEST_CASE("gradcheck at the default check size passes") {
  const Run r = cli({"gradcheck", "--size", "128", "--projections", "180"});
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("FAIL") == std::string::npos);
}

TEST_CASE("phantom writes grid and preview") {
  const auto dir = testing::temp_dir("cli_phantom");
  CHECK(cli({"phantom", "--size", "64", "--out", dir.string()}).code == kExitOk);
  CHECK(std::filesystem::exists(dir / "phantom.json"));
  CHECK(std::filesystem::file_size(dir / "phantom.bin") == 64u * 64u * 4u);
  CHECK(std::filesystem::exists(dir / "phantom.pgm"));
}

TEST_CASE("simulate is reproducible and optimize consumes its bundle") {
  const auto dir = testing::temp_dir("cli_sim");
  write_small_config(dir / "c.json");
  const std::string cfg = (dir / "c.json").string();
  REQUIRE(cli({"simulate", "--config", cfg, "--seed", "7", "--out", (dir / "a").string()}).code == kExitOk);
  REQUIRE(cli({"simulate", "--config", cfg, "--seed", "7", "--out", (dir / "b").string()}).code == kExitOk);
  REQUIRE(cli({"simulate", "--config", cfg, "--seed", "8", "--out", (dir / "c").string()}).code == kExitOk);
  CHECK(slurp(dir / "a" / "sinogram.bin") == slurp(dir / "b" / "sinogram.bin"));
  CHECK(slurp(dir / "a" / "perturbed_matrices.json") == slurp(dir / "b" / "perturbed_matrices.json"));
  CHECK(slurp(dir / "a" / "perturbed_matrices.json") != slurp(dir / "c" / "perturbed_matrices.json"));
  for (const char* name : {"phantom.bin", "sinogram.json", "nominal_matrices.json", "reference.pgm",
                           "corrupted.pgm", "motion_true.csv", "bundle.json"})
    CHECK(std::filesystem::exists(dir / "a" / name));

  const Run r = cli({"optimize", (dir / "a").string(), "--algorithms", "bfgs"});
  CHECK(r.code == kExitOk);
  const auto out = dir / "a" / "optimize_bfgs";
  CHECK(std::filesystem::exists(out / "result.json"));
  CHECK(std::filesystem::exists(out / "recovered.pgm"));
  CHECK(std::filesystem::exists(out / "motion_recovered.csv"));
  CHECK(std::filesystem::exists(out / "trace_bfgs_7.csv"));
  CHECK(cli({"optimize", (dir / "a").string(), "--algorithms", "bfgs,cma_es"}).code == kExitUsage);
}

TEST_CASE("bench runs the comparison and both sweeps") {
  const auto dir = testing::temp_dir("cli_bench");
  write_small_config(dir / "c.json");
  const std::string cfg = (dir / "c.json").string();
  const Run r = cli({"bench", "--config", cfg, "--out", (dir / "cmp").string()});
  CHECK(r.code == kExitOk);
  CHECK(std::filesystem::exists(dir / "cmp" / "results.csv"));
  CHECK(std::filesystem::exists(dir / "cmp" / "summary.json"));

  const Run s = cli({"bench", "--config", cfg, "--out", (dir / "sw").string(), "--factors", "1,2", "--nodes",
                     "4,10", "--algorithms", "bfgs"});
  CHECK(s.code == kExitOk);
  CHECK(std::filesystem::exists(dir / "sw" / "capture_range.csv"));
  CHECK(std::filesystem::exists(dir / "sw" / "free_parameters.csv"));
  CHECK(cli({"bench", "--config", cfg, "--algorithms", "sgd"}).code == kExitUsage);
}
