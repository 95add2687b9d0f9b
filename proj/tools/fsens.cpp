#include <omp.h>

#include <CLI11.hpp>
#include <iostream>
#include <optional>
#include <string>

#include "fsens/cli_io.hpp"
#include "fsens/errors.hpp"

namespace io = fsens::io;

namespace {

// Flags shared by every subcommand. Values given here override the config file.
struct Overrides {
  std::string config;
  std::optional<std::string> output_dir;
  std::optional<int> threads;
  std::optional<std::string> divergence;
  std::optional<double> k, rho, level, threshold, eps, delta, sigma_coef;
  std::optional<std::uint64_t> seed, dgp_seed;
  std::optional<long> n;
  std::optional<std::string> target, effect, data, figure, scale;
  std::vector<double> rho_grid;

  void apply(io::RunConfig& c) const {
    if (divergence) c.divergence = *divergence;
    if (k) c.k = *k;
    if (rho) c.rho = *rho;
    if (level) c.level = *level;
    if (threshold) c.threshold = *threshold;
    if (eps) c.eps = *eps;
    if (delta) c.dgp_delta = *delta;
    if (sigma_coef) c.dgp_sigma_coef = *sigma_coef;
    if (seed) c.seed = *seed;
    if (dgp_seed) c.dgp_seed = *dgp_seed;
    if (n) c.dgp_n = *n;
    if (target) c.target = *target;
    if (effect) c.effect = *effect;
    if (data) c.data = *data;
    if (figure) c.figure = *figure;
    if (scale) c.scale = *scale;
    if (!rho_grid.empty()) c.rho_grid = rho_grid;
    if (threads) c.threads = *threads;
  }
};

void common_flags(CLI::App* sub, Overrides& o) {
  sub->add_option("--config", o.config, "JSON config file");
  sub->add_option("--output-dir", o.output_dir, "output directory (overrides FSENS_OUTPUT_DIR and the config)");
  sub->add_option("--threads", o.threads, "OpenMP threads (0: default)");
  sub->add_option("--divergence", o.divergence, "kl, chi2 or cressie_read");
  sub->add_option("--k", o.k, "Cressie-Read index");
  sub->add_option("--seed", o.seed, "estimator seed");
  sub->add_option("--eps", o.eps, "lower bound on alpha");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"f-divergence sensitivity analysis for treatment effects"};
  app.require_subcommand(1);
  app.set_version_flag("--version", io::version());
  Overrides o;

  auto* simulate = app.add_subcommand("simulate", "draw a dataset from the simulation design");
  common_flags(simulate, o);
  simulate->add_option("--n", o.n, "sample size");
  simulate->add_option("--delta", o.delta, "confounding strength");
  simulate->add_option("--sigma-coef", o.sigma_coef, "heteroskedasticity coefficient");
  simulate->add_option("--dgp-seed", o.dgp_seed, "data seed");

  auto* estimate = app.add_subcommand("estimate", "estimate one bound with a confidence interval");
  common_flags(estimate, o);
  estimate->add_option("--data", o.data, "dataset CSV");
  estimate->add_option("--rho", o.rho, "divergence budget");
  estimate->add_option("--target", o.target, "mu10_lower, mu10_upper, mu01_lower, mu01_upper");
  estimate->add_option("--level", o.level, "confidence level");

  auto* curve = app.add_subcommand("curve", "effect bounds over a grid of budgets");
  common_flags(curve, o);
  curve->add_option("--data", o.data, "dataset CSV");
  curve->add_option("--rho-grid", o.rho_grid, "ascending budgets")->delimiter(',');
  curve->add_option("--effect", o.effect, "atc, att, ate");
  curve->add_option("--level", o.level, "confidence level");
  curve->add_option("--threshold", o.threshold, "effect value whose inclusion defines rho-hat");

  auto* reproduce = app.add_subcommand("reproduce", "regenerate a figure's data");
  common_flags(reproduce, o);
  reproduce->add_option("--figure", o.figure, "figure id 1-6")->required();
  reproduce->add_option("--scale", o.scale, "paper or desk");

  auto* validate = app.add_subcommand("validate-divergence", "check a divergence's conjugate numerically");
  common_flags(validate, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    io::RunConfig cfg;
    if (!o.config.empty()) cfg = io::load_config(o.config);
    o.apply(cfg);
    if (cfg.threads < 0) throw fsens::ConfigError("threads must be nonnegative");
    if (cfg.threads > 0) omp_set_num_threads(cfg.threads);
    const auto out = io::resolve_output_dir(cfg, o.output_dir);

    std::vector<std::filesystem::path> written;
    if (simulate->parsed()) written = io::cmd_simulate(cfg, out);
    else if (estimate->parsed()) written = io::cmd_estimate(cfg, out);
    else if (curve->parsed()) written = io::cmd_curve(cfg, out);
    else if (reproduce->parsed()) written = io::cmd_reproduce(cfg, out);
    else {
      const auto report = io::cmd_validate_divergence(cfg);
      std::cout << report.dump(2) << "\n";
      return report["ok"].get<bool>() ? 0 : 4;
    }
    for (const auto& p : written) std::cout << p.string() << "\n";
    return 0;
  } catch (const fsens::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const fsens::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const fsens::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}
