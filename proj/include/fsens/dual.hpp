#pragma once

#include <span>
#include <string>
#include <vector>

#include "fsens/divergence.hpp"
#include "fsens/optim.hpp"

namespace fsens::dual {

// l(alpha, eta, y) = alpha f*((y + eta) / (-alpha)) + eta + alpha rho.
// Jointly convex in (alpha, eta) for alpha > 0; +inf where f* is infinite.
double dual_loss(const Divergence& spec, double rho, double alpha, double eta, double y);

struct LossGradient {
  double d_alpha = 0.0;
  double d_eta = 0.0;
};
LossGradient dual_loss_gradient(const Divergence& spec, double rho, double alpha, double eta, double y);

// The Hessian is (f*''(s) / alpha) [s^2, s; s, 1] with s = -(y + eta) / alpha.
struct LossHessian {
  double aa = 0.0;
  double ab = 0.0;
  double bb = 0.0;
};
LossHessian dual_loss_hessian(const Divergence& spec, double rho, double alpha, double eta, double y);

struct DualPoint {
  double alpha = 0.0;
  double eta = 0.0;
  double value = 0.0;  // minimized (weighted) sample-average loss
  double gradient_norm = 0.0;
  bool at_floor = false;  // alpha pinned at eps (reported, not resolved)
  int iterations = 0;
  std::vector<std::string> warnings;

  // Lower bound on the conditional counterfactual mean for shift weight r.
  double lower_bound(double r = 1.0) const { return -r * value; }
};

// Minimizes the sample average of dual_loss over alpha >= eps, eta real, by
// restarted Nelder-Mead on (log(alpha - eps), eta) followed by a projected
// Newton polish. `weights`, when given, are normalized probabilities.
DualPoint solve_pointwise_dual(const Divergence& spec, double rho, std::span<const double> y_samples, double eps,
                               const optim::OptimizerConfig& opt = {}, std::span<const double> weights = {});

// Sample-average loss, gradient and Hessian at one (alpha, eta).
struct PointwiseEval {
  double value = 0.0;
  LossGradient grad;
  LossHessian hess;
};
PointwiseEval pointwise_objective(const Divergence& spec, double rho, double alpha, double eta,
                                  std::span<const double> y, std::span<const double> weights = {});

struct DiscreteInstance {
  std::vector<double> support;
  std::vector<double> probs;
  double rho = 0.0;
  double r = 1.0;

  void validate() const;
};

struct PrimalSolution {
  double min_mean = 0.0;
  std::vector<double> L;  // optimal likelihood-ratio weights per atom (sum_i p_i L_i = r)
  int iterations = 0;
};

// min sum_i p_i L_i y_i  s.t.  sum_i p_i L_i = r,  sum_i p_i f(L_i / r) <= rho,  L >= 0.
// Solved in the primal by a log-barrier interior-point method with
// equality-constrained Newton steps (barrier parameter driven to 1e-11).
PrimalSolution primal_oracle_discrete(const Divergence& spec, const DiscreteInstance& inst);

}  // namespace fsens::dual
