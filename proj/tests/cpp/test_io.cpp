#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "qresp/io.hpp"
#include "qresp/model.hpp"

using namespace qresp;
using namespace qresp::io;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("qresp_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path config_dir() { return fs::path(QRESP_CONFIG_DIR); }

}  // namespace

TEST_CASE("shipped example configs parse and match the presets") {
  const RunConfig cfg = parse_config_file(config_dir() / "example1.cfg");
  CHECK(cfg.model_name == "example1");
  const MatterModel preset = preset_example1();
  CHECK((cfg.model.H - preset.H).cwiseAbs().maxCoeff() == 0.0);
  CHECK((cfg.model.L - preset.L).cwiseAbs().maxCoeff() == 0.0);
  CHECK(cfg.model.omega0 == 1.0);
  CHECK(cfg.dt == 10.0);
  CHECK(cfg.chi2 == 5.0);
  CHECK(cfg.n_gamma == 0.25);
  CHECK(cfg.config_hash != 0);

  const RunConfig cfg2 = parse_config_file(config_dir() / "example2.cfg");
  CHECK(cfg2.model.sys_dim == 16);
  CHECK(cfg2.model.noise_dim == 4);
}

TEST_CASE("empty and malformed configs produce itemized errors") {
  auto parsed = parse_config("{}");
  REQUIRE(std::holds_alternative<std::vector<ConfigError>>(parsed));
  const auto errors = std::get<std::vector<ConfigError>>(parsed);
  REQUIRE(!errors.empty());
  CHECK(errors.front().message.find("model") != std::string::npos);

  auto syntax = parse_config("{ \"model\": ");
  REQUIRE(std::holds_alternative<std::vector<ConfigError>>(syntax));
  CHECK(std::get<std::vector<ConfigError>>(syntax).front().message.find("syntax") !=
        std::string::npos);
}

TEST_CASE("unknown keys are rejected with a suggestion") {
  auto parsed = parse_config(R"({"model": "example1", "pulse": {"t_gama": 1.0}})");
  REQUIRE(std::holds_alternative<std::vector<ConfigError>>(parsed));
  const auto errors = std::get<std::vector<ConfigError>>(parsed);
  bool suggested = false;
  for (const auto& e : errors)
    suggested |= e.message.find("t_gamma") != std::string::npos &&
                 e.message.find("did you mean") != std::string::npos;
  CHECK(suggested);
}

TEST_CASE("inline models parse with real and imaginary parts") {
  const std::string text = R"({
    "model": {
      "sys_dim": 2,
      "H": {"re": [[0, 0], [0, 1.0]]},
      "L": {"re": [[0, 0.1], [0, 0]], "im": [[0, 0.05], [0, 0]]},
      "sys_grading": [0, 1],
      "omega0": 1.0,
      "measured_state": 1
    }
  })";
  auto parsed = parse_config(text);
  REQUIRE(std::holds_alternative<RunConfig>(parsed));
  const RunConfig cfg = std::get<RunConfig>(parsed);
  CHECK(cfg.model.L(0, 1) == Complex(0.1, 0.05));
  CHECK(validate(cfg.model).empty());
}

TEST_CASE("invalid inline models report validation failures") {
  const std::string text = R"({
    "model": {
      "sys_dim": 2,
      "H": {"re": [[0, 0.3], [0, 1.0]]},
      "L": {"re": [[0, 0.1], [0, 0]]},
      "sys_grading": [0, 1]
    }
  })";
  auto parsed = parse_config(text);
  REQUIRE(std::holds_alternative<std::vector<ConfigError>>(parsed));
  bool mentions_hermitian = false;
  for (const auto& e : std::get<std::vector<ConfigError>>(parsed))
    mentions_hermitian |= e.message.find("Hermitian") != std::string::npos;
  CHECK(mentions_hermitian);
}

TEST_CASE("table round-trips exactly through CSV") {
  TempDir tmp;
  auto gen = oracles::rng(61);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  GreensTable t;
  t.dt = 10.0;
  t.values.resize(7, 5);
  t.errors.resize(7, 5);
  for (int i = 0; i < 7; ++i)
    for (int k = 0; k < 5; ++k) {
      t.values(i, k) = dist(gen) * 1e-3;
      t.errors(i, k) = std::abs(dist(gen)) * 1e-5;
    }
  t.source = "sampled";
  t.n_gamma = 0.25;
  t.trials = 1234;
  t.seed = 99;

  const auto path = tmp.path / "table.csv";
  write_table(t, path, 42);
  const GreensTable r = read_table(path);
  CHECK(r.dt == t.dt);
  CHECK((r.values - t.values).cwiseAbs().maxCoeff() == 0.0);
  CHECK((r.errors - t.errors).cwiseAbs().maxCoeff() == 0.0);
  CHECK(r.source == "sampled");
  CHECK(r.trials == 1234);
  CHECK(r.seed == 99);
}

TEST_CASE("table reader diagnoses malformed files") {
  TempDir tmp;
  const auto path = tmp.path / "bad.csv";

  std::ofstream(path) << "t_m,t_int,G\n";
  CHECK_THROWS_WITH_AS(read_table(path), doctest::Contains("t_m,t_int,G,sigma_G"),
                       std::runtime_error);

  std::ofstream(path) << "t_m,t_int,G,sigma_G\n0,0,1\n";
  CHECK_THROWS_WITH_AS(read_table(path), doctest::Contains("row 2"), std::runtime_error);

  std::ofstream(path) << "t_m,t_int,G,sigma_G\n0,0,abc,0\n";
  CHECK_THROWS_WITH_AS(read_table(path), doctest::Contains("not a number"), std::runtime_error);

  std::ofstream(path) << "t_m,t_int,G,sigma_G\n0,0,1,0\n0,10,1,0\n10,0,1,0\n";
  CHECK_THROWS_WITH_AS(read_table(path), doctest::Contains("rectangular"), std::runtime_error);
}

TEST_CASE("a 101x101 table file stays within the documented size bound") {
  TempDir tmp;
  GreensTable t;
  t.dt = 10.0;
  t.values = RealMatrix::Constant(101, 101, 1.2345678901234567e-3);
  t.errors = RealMatrix::Constant(101, 101, 9.876543210987654e-5);
  const auto path = tmp.path / "big.csv";
  write_table(t, path, 0);
  const auto bytes = fs::file_size(path);
  CHECK(bytes < 2 * 1024 * 1024);  // documented bound: under 2 MiB
  CHECK(bytes > 100 * 1024);
}

TEST_CASE("command drivers write deterministic artifacts") {
  TempDir tmp;
  RunConfig cfg = parse_config_file(config_dir() / "example1.cfg");
  cfg.dt = 10.0;
  cfg.t_max_m = 100.0;
  cfg.t_max_int = 100.0;
  cfg.trials = 500;

  CommandOptions opt;
  opt.out_dir = (tmp.path / "a").string();
  cmd_oracle(cfg, opt);
  cmd_protocol(cfg, opt);
  cmd_sample(cfg, opt);
  cmd_budget(cfg, opt);

  CommandOptions opt2;
  opt2.out_dir = (tmp.path / "b").string();
  cmd_oracle(cfg, opt2);
  cmd_protocol(cfg, opt2);
  cmd_sample(cfg, opt2);

  for (const char* name :
       {"greens_exact.csv", "greens_recon.csv", "greens_sampled.csv", "single_pulse.csv",
        "two_pulse.csv"}) {
    CAPTURE(name);
    CHECK(slurp(tmp.path / "a" / name) == slurp(tmp.path / "b" / name));
  }
  CHECK(fs::exists(tmp.path / "a" / "budget.json"));

  // convolve consumes the oracle table it finds in the output directory
  cmd_convolve(cfg, opt);
  CHECK(fs::exists(tmp.path / "a" / "population.csv"));
  const std::string curve = slurp(tmp.path / "a" / "population.csv");
  CHECK(curve.rfind("t,P,sigma_P\n", 0) == 0);
}

TEST_CASE("auxcheck driver writes the elimination report") {
  TempDir tmp;
  RunConfig cfg = parse_config_file(config_dir() / "example1.cfg");
  cfg.auxcheck_chi2 = {0.5, 5.0};
  cfg.auxcheck_t_max = 50.0;
  cfg.auxcheck_steps = 6;
  CommandOptions opt;
  opt.out_dir = (tmp.path / "aux").string();
  cmd_auxcheck(cfg, opt);
  const std::string report = slurp(tmp.path / "aux" / "auxcheck.json");
  CHECK(report.find("max_trace_distance") != std::string::npos);
  CHECK(report.find("fitted_exponent_in_chi") != std::string::npos);
}

TEST_CASE("sweep driver emits a summary with exact references") {
  TempDir tmp;
  RunConfig cfg = parse_config_file(config_dir() / "example1.cfg");
  cfg.dt = 10.0;
  cfg.t_max_m = 350.0;
  cfg.t_max_int = 300.0;
  cfg.probe_t_m = 50.0;
  cfg.probe_t_int = 250.0;
  cfg.probe_t = 0.0;
  cfg.wp_sigma_t = 30.0;
  CommandOptions opt;
  opt.out_dir = (tmp.path / "sweep").string();
  opt.workers = 2;
  cmd_sweep(cfg, opt, "n_gamma", {0.5, 0.25});
  const std::string summary = slurp(tmp.path / "sweep" / "sweep.csv");
  CHECK(summary.rfind("axis,value,G_recon_probe,G_exact_probe,P_recon_probe,P_exact_ref\n", 0) ==
        0);
  CHECK(summary.find("n_gamma,0.5") != std::string::npos);
  CHECK(fs::exists(tmp.path / "sweep" / "n_gamma_0" / "greens_recon.csv"));
  CHECK_THROWS(cmd_sweep(cfg, opt, "bogus", {1.0}));
}
