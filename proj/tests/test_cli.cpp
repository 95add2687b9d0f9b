#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "fsens/cli_io.hpp"
#include "fsens/errors.hpp"

namespace fs = std::filesystem;
using namespace fsens;

namespace {

const std::string kCli = FSENS_CLI_PATH;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("fsens_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run(const std::string& args) {
  const std::string cmd = kCli + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string first_line(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

int line_count(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) ++n;
  return n;
}

}  // namespace

TEST_CASE("simulate is byte-identical across reruns") {
  const auto a = scratch("sim_a"), b = scratch("sim_b");
  REQUIRE(run("simulate --n 1000 --delta 0.5 --dgp-seed 7 --output-dir " + a.string()) == 0);
  REQUIRE(run("simulate --n 1000 --delta 0.5 --dgp-seed 7 --output-dir " + b.string()) == 0);
  CHECK(slurp(a / "dataset.csv") == slurp(b / "dataset.csv"));
  CHECK(slurp(a / "dataset.json") == slurp(b / "dataset.json"));
  CHECK(first_line(a / "dataset.csv") == "x1,x2,x3,x4,t,y");
  CHECK(line_count(a / "dataset.csv") == 1001);
  const auto side = io::json::parse(slurp(a / "dataset.json"));
  CHECK(side["rho"].get<double>() == doctest::Approx(0.125));
  CHECK(side["config_hash"].get<std::string>().size() == 16);
}

TEST_CASE("unwritable output location is a data error") {
  const auto dir = scratch("unwritable");
  { std::ofstream(dir / "file") << "x"; }
  CHECK(run("simulate --n 10 --output-dir " + (dir / "file" / "sub").string()) == 3);
  io::RunConfig cfg;
  cfg.dgp_n = 10;
  CHECK_THROWS_AS(io::cmd_simulate(cfg, dir / "file" / "sub"), DataError);
}

TEST_CASE("estimate reproduces the golden file exactly") {
  const fs::path data_dir = FSENS_TEST_DATA;
  const auto golden = io::json::parse(slurp(data_dir / "golden_estimate.json"));
  for (const char* threads : {"1", "3"}) {
    const auto dir = scratch(std::string("golden_") + threads);
    REQUIRE(run("estimate --data " + (data_dir / "golden_dataset.csv").string() +
                " --rho 0.125 --target mu10_lower --threads " + threads + " --output-dir " + dir.string()) == 0);
    const auto got = io::json::parse(slurp(dir / "estimate.json"));
    CHECK(got["point"].get<double>() == golden["point"].get<double>());
    CHECK(got["sigma_hat"].get<double>() == golden["sigma_hat"].get<double>());
  }
  // Reruns overwrite with identical bytes.
  const auto a = scratch("golden_1"), b = scratch("golden_rerun");
  for (const auto& d : {a, b})
    REQUIRE(run("estimate --data " + (data_dir / "golden_dataset.csv").string() + " --rho 0.125 --output-dir " + d.string()) == 0);
  CHECK(slurp(a / "estimate.json") == slurp(b / "estimate.json"));
  CHECK(slurp(a / "estimate_components.csv") == slurp(b / "estimate_components.csv"));
}

TEST_CASE("dataset CSV round-trips exactly") {
  const auto dir = scratch("roundtrip");
  auto cfg = sim::DgpConfig::paper();
  cfg.n = 50;
  const auto data = sim::generate(cfg);
  io::write_dataset_csv(dir / "d.csv", data);
  const auto back = io::read_dataset_csv(dir / "d.csv");
  CHECK(back.X == data.X);
  CHECK(back.T == data.T);
  CHECK(back.Y == data.Y);
}

TEST_CASE("input errors map to exit codes") {
  const auto dir = scratch("errors");
  CHECK(run("simulate --n 0 --output-dir " + dir.string()) == 2);
  CHECK(run("no-such-command") == 2);
  CHECK(run("reproduce --figure 9 --output-dir " + dir.string()) == 2);
  CHECK(run("estimate --data " + (dir / "missing.csv").string() + " --rho 0.1") == 3);

  {
    std::ofstream out(dir / "no_t.csv");
    out << "x1,x2,y\n0.1,0.2,1.0\n0.3,0.4,2.0\n";
  }
  CHECK(run("estimate --data " + (dir / "no_t.csv").string() + " --rho 0.1 --output-dir " + dir.string()) == 3);
  CHECK_THROWS_WITH_AS(io::read_dataset_csv(dir / "no_t.csv"), doctest::Contains("'t'"), DataError);

  REQUIRE(run("simulate --n 300 --output-dir " + dir.string()) == 0);
  CHECK(run("estimate --data " + (dir / "dataset.csv").string() + " --rho 0.1 --level 1.5 --output-dir " + dir.string()) == 2);
  CHECK(run("estimate --data " + (dir / "dataset.csv").string() + " --rho -1 --output-dir " + dir.string()) == 2);
}

TEST_CASE("config files reject unknown keys and empty grids") {
  const auto dir = scratch("config");
  {
    std::ofstream out(dir / "typo.json");
    out << R"({"rhoo": 0.1})";
  }
  CHECK_THROWS_AS(io::load_config(dir / "typo.json"), ConfigError);
  CHECK(run("estimate --config " + (dir / "typo.json").string()) == 2);

  auto cfg = io::RunConfig::from_json(io::json::parse(R"({"rho_grid": [], "data": "x.csv"})"));
  CHECK_THROWS_AS(cfg.validate("curve"), ConfigError);
  CHECK_THROWS_AS(io::RunConfig::from_json(io::json::parse(R"({"sieve": {"J": "many"}})")), ConfigError);
  CHECK_THROWS_AS(io::RunConfig::from_json(io::json::parse(R"({"level": "high"})")), ConfigError);

  const auto parsed = io::RunConfig::from_json(io::json::parse(R"({"sieve": {"kind": "spline", "J": 6}, "regressor": {"kind": "knn", "k": 15}})"));
  CHECK(parsed.sieve.J == 6);
  CHECK(io::RunConfig::from_json(parsed.to_json()).to_json() == parsed.to_json());
}

TEST_CASE("config hash ignores output location") {
  io::RunConfig a, b;
  b.output_dir = "elsewhere";
  b.threads = 3;
  CHECK(io::config_hash(a) == io::config_hash(b));
  b.seed = 2;
  CHECK(io::config_hash(a) != io::config_hash(b));
}

TEST_CASE("output directory precedence") {
  io::RunConfig cfg;
  cfg.output_dir = "from_config";
  ::unsetenv("FSENS_OUTPUT_DIR");
  CHECK(io::resolve_output_dir(cfg, std::nullopt) == "from_config");
  ::setenv("FSENS_OUTPUT_DIR", "from_env", 1);
  CHECK(io::resolve_output_dir(cfg, std::nullopt) == "from_env");
  CHECK(io::resolve_output_dir(cfg, std::string("from_flag")) == "from_flag");
  ::unsetenv("FSENS_OUTPUT_DIR");
}

TEST_CASE("estimate and curve outputs") {
  const auto dir = scratch("curve");
  REQUIRE(run("simulate --n 1500 --output-dir " + dir.string()) == 0);
  const std::string data = (dir / "dataset.csv").string();

  REQUIRE(run("estimate --data " + data + " --rho 0.125 --output-dir " + dir.string()) == 0);
  const auto est = io::json::parse(slurp(dir / "estimate.json"));
  CHECK(est.contains("point"));
  CHECK(est["sigma_hat"].get<double>() > 0.0);
  CHECK(est["ci"]["two_sided"]["lo"].get<double>() < est["point"].get<double>());
  CHECK(first_line(dir / "estimate_components.csv") == "row,arm,fold,component");
  CHECK(line_count(dir / "estimate_components.csv") == 1501);

  std::string grid;
  for (int k = 1; k <= 20; ++k) grid += (k > 1 ? "," : "") + std::to_string(0.05 * k);
  REQUIRE(run("curve --data " + data + " --rho-grid " + grid + " --output-dir " + dir.string()) == 0);
  CHECK(first_line(dir / "curve.csv") == "rho,lcb,ucb,lcb_monotone,ucb_monotone");
  CHECK(line_count(dir / "curve.csv") == 21);
  {
    std::ifstream in(dir / "curve.csv");
    std::string line;
    std::getline(in, line);
    double prev_l = 1e300, prev_u = -1e300;
    while (std::getline(in, line)) {
      double rho, l, u, lm, um;
      char c;
      std::istringstream ss(line);
      ss >> rho >> c >> l >> c >> u >> c >> lm >> c >> um;
      CHECK(lm <= prev_l);
      CHECK(um >= prev_u);
      CHECK(lm <= um);
      prev_l = lm;
      prev_u = um;
    }
  }
  const auto side = io::json::parse(slurp(dir / "curve.json"));
  REQUIRE(side.contains("rho_hat"));
  CHECK((side["rho_hat"].is_number() || side["rho_hat"] == "none"));
}

TEST_CASE("reproduce writes the documented table layouts") {
  const auto dir = scratch("figure");
  REQUIRE(run("reproduce --figure 2 --output-dir " + dir.string()) == 0);
  CHECK(first_line(dir / "figure2.csv") == "delta,rho,q05,q25,q50,q75,q95");
  CHECK(fs::exists(dir / "figure2.json"));
  // Desk scale: two deltas, 200 replicates of n = 2000.
  REQUIRE(run("reproduce --figure 5 --scale desk --output-dir " + dir.string()) == 0);
  CHECK(first_line(dir / "figure5.csv") == "delta,rho,coverage_lower,coverage_upper,coverage_mean,se");
  CHECK(line_count(dir / "figure5.csv") == 3);
}

TEST_CASE("validate-divergence reports the built-in families as valid") {
  io::RunConfig cfg;
  for (const char* name : {"kl", "chi2"}) {
    cfg.divergence = name;
    CHECK(io::cmd_validate_divergence(cfg)["ok"].get<bool>());
  }
  cfg.divergence = "cressie_read";
  cfg.k = 3.0;
  CHECK(io::cmd_validate_divergence(cfg)["ok"].get<bool>());
  CHECK(run("validate-divergence --divergence kl") == 0);
  CHECK(run("validate-divergence --divergence cressie_read") == 2);
}
