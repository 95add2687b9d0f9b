#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fsens/divergence.hpp"
#include "fsens/estimator.hpp"
#include "fsens/stats.hpp"

namespace fsens::sim {

// X ~ U[0,1]^d, T | X ~ Bernoulli(sigmoid(gamma' X)),
// Y(t) = X' beta_t - delta (1 - T) sigma(X) + eps sigma(X), sigma^2(x) = 1 + c x_1^2.
struct DgpConfig {
  long n = 15000;
  int d = 4;
  Eigen::VectorXd gamma;
  Eigen::VectorXd beta1;
  Eigen::VectorXd beta0;
  double delta = 0.5;
  double sigma_coef = 1.25;
  std::uint64_t seed = 1;

  static DgpConfig paper();  // the published coefficients, d = 4
  void validate() const;     // throws ConfigError

  double propensity(const double* x) const;
  double sigma(const double* x) const;
  double mean(const double* x, int t) const;
  // KL budget at which the design attains the lower bound on E[Y(1) | T = 0].
  double attained_rho() const { return 0.5 * delta * delta; }
};

est::Dataset generate(const DgpConfig& cfg);

// Density ratio of U | X = x, T = 0 to U | X = x, T = 1 for the potential
// outcome U = Y(1): exp(-delta (u - m) / sigma - delta^2 / 2), m = x' beta1.
double true_odds_ratio(const double* x, double u, const DgpConfig& cfg);

// Expectation over X | T = t of g(x), by tensor Gauss-Legendre quadrature
// (d <= 5) or Monte Carlo otherwise. Returns the estimate and an error
// proxy (order-doubling difference or MC standard error).
stats::QuadratureResult conditional_expectation(const DgpConfig& cfg, int t, const std::function<double(const double*)>& g,
                                                long mc_samples = 400000);

struct TruthOptions {
  double tolerance = 1e-10;  // quadrature tolerance for the per-sigma bound
  long x_samples = 400000;   // used only when d > 5
};

struct GroundTruth {
  double rho = 0.0;
  double mu10_lower = 0.0;
  double mu10_upper = 0.0;
  double true_mean = 0.0;   // E[Y(1) | T = 0] under the design
  double mc_error = 0.0;
  double unit_lower = 0.0;  // pointwise lower bound for a N(0, 1) outcome
  double unit_upper = 0.0;
  std::string method;
};

// The conditional law of Y(1) on the treated arm is N(m(x), sigma(x)^2), so
// the pointwise bounds are m(x) + sigma(x) * b for the N(0, 1) bounds b.
// Those come from minimizing the exact Gaussian expectation of the dual loss
// (adaptive quadrature, no sampling); the X | T = 0 marginalization uses
// conditional_expectation.
GroundTruth ground_truth_bounds(const DgpConfig& cfg, const Divergence& spec, double rho, const TruthOptions& opt = {});

// Pointwise lower bound for a N(0, 1) outcome under (spec, rho).
double unit_normal_lower_bound(const Divergence& spec, double rho, double tolerance = 1e-10);

// ATC / ATT / ATE under the design (the confounding shift is shared by both
// potential outcomes of the controls).
struct TrueEffects {
  double atc = 0.0;
  double att = 0.0;
  double ate = 0.0;
  double p1 = 0.0;
};
TrueEffects true_effects(const DgpConfig& cfg);

struct CoverageConfig {
  DgpConfig base = DgpConfig::paper();
  std::vector<double> deltas{0.5, 1.0};
  std::function<double(double)> rho_rule = [](double delta) { return 0.5 * delta * delta; };
  int reps = 200;
  double level = 0.95;
  Divergence spec = Divergence::kl();
  est::EstimatorConfig estimator;
};

struct CoverageCell {
  double delta = 0.0;
  double rho = 0.0;
  int reps = 0;
  int failures = 0;
  std::vector<std::string> failure_messages;
  double truth_lower = 0.0;
  double truth_upper = 0.0;
  double true_mean = 0.0;
  double coverage_lower = 0.0;        // two-sided CI around mu-hat^- covers mu^-
  double coverage_upper = 0.0;        // two-sided CI around mu-hat^+ covers mu^+
  double coverage_mean = 0.0;         // [CI_lower.lo, CI_upper.hi] covers E[Y(1) | T = 0]
  double coverage_one_sided_lower = 0.0;  // LCB <= mu^-
  double coverage_one_sided_upper = 0.0;  // UCB >= mu^+
  double se = 0.0;                    // binomial SE at the nominal level
  std::vector<double> lower_points;
  std::vector<double> upper_points;
};

std::vector<CoverageCell> coverage_experiment(const CoverageConfig& cfg);

// -2 delta * integral of u phi(u) / (1 + e^{delta u}) du.
stats::QuadratureResult example1_bound(double delta);

// Quantiles of OR(X, U) over the treated arm (U = Y(1) drawn from its law).
std::vector<double> odds_ratio_quantiles(const DgpConfig& cfg, const std::vector<double>& probs, long draws);

}  // namespace fsens::sim
