#pragma once

#include <Eigen/Dense>

#include "fsens/divergence.hpp"

// Hot loops with a serial reference and an OpenMP version. The parallel
// versions reduce over fixed-size row chunks combined in chunk order, so
// their results do not depend on the thread count.
namespace fsens::kernels {

inline constexpr Eigen::Index kChunkRows = 256;

enum class Exec { Serial, Parallel };

// Empirical dual risk of alpha = max(eps, Phi a), eta = Phi b on (Phi, y),
// with gradient and Hessian in the stacked coefficients (a, b). Rows at the
// floor contribute no alpha derivatives.
struct RiskEval {
  double value = 0.0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
  bool finite = true;
  int floor_hits = 0;
};

RiskEval erm_risk(const Divergence& spec, double rho, double eps, const Eigen::MatrixXd& phi, const Eigen::VectorXd& y,
                  const Eigen::VectorXd& a, const Eigen::VectorXd& b, bool derivatives, Exec exec);

// Sum over rows of w_i * v_i in chunked order.
double weighted_sum(const Eigen::VectorXd& w, const Eigen::VectorXd& v, Exec exec);

}  // namespace fsens::kernels
